#pragma once

// Helpers shared by the test suites: independent oracles, extra models and
// constraint sets, and random generators.

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "cmam/action.hpp"
#include "cmam/curve.hpp"
#include "cmam/manifold.hpp"
#include "cmam/models.hpp"
#include "cmam/wlinalg.hpp"

namespace cmam::test {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline Vector e(Index n, Index i, double s = 1.0) {
  Vector out = Vector::Zero(n);
  out(i) = s;
  return out;
}

/// (x1, x2) in S^2 x S^2 from in-plane angles.
inline Vector planar_pair(double t1, double t2) {
  return vec({std::cos(t1), std::sin(t1), 0.0, std::cos(t2), std::sin(t2), 0.0});
}

struct Random {
  std::mt19937_64 rng;
  explicit Random(std::uint64_t seed) : rng(seed) {}

  double uniform(double a = 0.0, double b = 1.0) {
    return std::uniform_real_distribution<double>(a, b)(rng);
  }
  Vector normal(Index n) {
    std::normal_distribution<double> g;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = g(rng);
    return v;
  }
  Matrix normal(Index r, Index c) {
    std::normal_distribution<double> g;
    Matrix m(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) m(i, j) = g(rng);
    return m;
  }
  /// SPD with eigenvalues spread over roughly [0.2, 5].
  Matrix spd(Index n) {
    const Matrix q = Eigen::HouseholderQR<Matrix>(normal(n, n)).householderQ();
    Vector d(n);
    for (Index i = 0; i < n; ++i) d(i) = std::exp(uniform(std::log(0.2), std::log(5.0)));
    return q * d.asDiagonal() * q.transpose();
  }
};

/// min u' a^{-1} u subject to U'u = U'v (U a tangent basis), by the full KKT system.
inline Vector kkt_pinv(const Vector& v, const Matrix& xi, const Matrix& a) {
  const Index n = v.size();
  const Index k = xi.cols();
  Eigen::HouseholderQR<Matrix> qr(xi);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix u = q.rightCols(n - k);
  const Index d = n - k;
  Matrix kkt = Matrix::Zero(n + d, n + d);
  kkt.topLeftCorner(n, n) = 2.0 * a.inverse();
  kkt.topRightCorner(n, d) = u;
  kkt.bottomLeftCorner(d, n) = u.transpose();
  Vector rhs = Vector::Zero(n + d);
  rhs.tail(d) = u.transpose() * v;
  return Eigen::FullPivLU<Matrix>(kkt).solve(rhs).head(n);
}

/// b(x) = B x with a constant metric, for properties that need anisotropy.
class LinearModel {
 public:
  LinearModel(Matrix b, Matrix a) : b_(std::move(b)), metric_(std::move(a)) {}

  Index dimension() const { return b_.rows(); }
  const ConstantMetric& metric() const { return metric_; }

  template <class T>
  VectorT<T> drift(const VectorT<T>& x) const {
    return b_.cast<T>() * x;
  }

 private:
  Matrix b_;
  ConstantMetric metric_;
};

/// Ellipsoid sum (x_i / r_i)^2 = 1: exercises the generic Newton retraction.
class Ellipsoid {
 public:
  explicit Ellipsoid(Vector radii) : r_(std::move(radii)) {}

  Index ambient_dimension() const { return r_.size(); }
  Index codimension() const { return 1; }

  template <class T>
  VectorT<T> residual(const VectorT<T>& x) const {
    VectorT<T> c(1);
    c(0) = x.cwiseQuotient(r_.cast<T>()).squaredNorm() - T(1.0);
    return c;
  }
  template <class T>
  MatrixT<T> normals(const VectorT<T>& x) const {
    return MatrixT<T>(T(2.0) * x.cwiseQuotient(r_.cwiseProduct(r_).cast<T>()));
  }
  Vector retract(const Vector& x) const { return newton_retract(*this, x); }
  Vector geodesic(const Vector& x, const Vector& y, double t) const {
    return retract((1.0 - t) * x + t * y);
  }

 private:
  Vector r_;
};

/// 0.5 int |P phi_dot - b|_a^2 dt with the raw (unprojected) drift; a
/// diagnostic only, it is not the rate function on the manifold.
template <Model M, ConstraintSet C>
double s0_action(const TimePath& path, const M& model, const C& manifold) {
  const double dt = path.time_step();
  double total = 0.0;
  for (Index i = 0; i < path.segment_count(); ++i) {
    const Vector mid = 0.5 * (path.points.col(i) + path.points.col(i + 1));
    const Vector velocity = (path.points.col(i + 1) - path.points.col(i)) / dt;
    const Matrix xi = manifold.template normals<double>(mid);
    const Vector w = project_tangent(velocity, xi) - drift(model, mid);
    total += dt * 0.5 * a_inner(w, w, diffusion_tensor(model, mid));
  }
  return total;
}

/// 0.5 int |b - Pi b|_a^2 dt, same quadrature as s0_action.
template <Model M, ConstraintSet C>
double normal_drift_energy(const TimePath& path, const M& model, const C& manifold) {
  const double dt = path.time_step();
  double total = 0.0;
  for (Index i = 0; i < path.segment_count(); ++i) {
    const Vector mid = 0.5 * (path.points.col(i) + path.points.col(i + 1));
    const Vector b = drift(model, mid);
    const Vector w = b - project_tangent(b, manifold.template normals<double>(mid));
    total += dt * 0.5 * a_inner(w, w, diffusion_tensor(model, mid));
  }
  return total;
}

/// Points on a smooth random curve between a and b on the unit sphere.
inline TimePath random_sphere_path(Random& rnd, Index n, Index segments, double horizon) {
  const Vector a = rnd.normal(n).normalized();
  const Vector b = rnd.normal(n).normalized();
  const Vector wobble = rnd.normal(n);
  TimePath p;
  p.horizon = horizon;
  p.points.resize(n, segments + 1);
  for (Index i = 0; i <= segments; ++i) {
    const double s = static_cast<double>(i) / static_cast<double>(segments);
    const Vector x = (1.0 - s) * a + s * b + std::sin(M_PI * s) * 0.5 * wobble;
    p.points.col(i) = x.normalized();
  }
  return p;
}

}  // namespace cmam::test
