#pragma once

// Manifolds given as level sets M = { x : c_k(x) = 0 } in R^n.
//
// A constraint set provides the residuals c(x), the normal basis
// xi_k = grad c_k(x) (columns of an n x K matrix), a retraction back onto M,
// and a geodesic-like interpolation used to build initial curves.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <string>
#include <tuple>
#include <utility>

#include "cmam/errors.hpp"
#include "cmam/wlinalg.hpp"

namespace cmam {

/// Absolute feasibility tolerance on constraint residuals after retraction.
inline constexpr double kFeasibilityTolerance = 1e-12;

template <class C>
concept ConstraintSet = requires(const C& c, const Vector& x, double t) {
  { c.ambient_dimension() } -> std::convertible_to<Index>;
  { c.codimension() } -> std::convertible_to<Index>;
  { c.template residual<double>(x) } -> std::convertible_to<Vector>;
  { c.template normals<double>(x) } -> std::convertible_to<Matrix>;
  { c.retract(x) } -> std::convertible_to<Vector>;
  { c.geodesic(x, x, t) } -> std::convertible_to<Vector>;
};

template <ConstraintSet C>
Index manifold_dimension(const C& c) {
  return c.ambient_dimension() - c.codimension();
}

template <ConstraintSet C>
Vector residual(const C& c, const Vector& x) {
  return c.template residual<double>(x);
}

template <ConstraintSet C>
double max_residual(const C& c, const Vector& x) {
  const Vector r = residual(c, x);
  return r.size() == 0 ? 0.0 : r.cwiseAbs().maxCoeff();
}

/// Newton correction x <- x - Xi0 (J(x) Xi0)^{-1} c(x) with Xi0 = xi(x_start).
///
/// Works for any constraint set; spheres override it with normalization.
template <class C>
Vector newton_retract(const C& c, const Vector& x, int max_iterations = 20) {
  Vector y = x;
  Vector r = c.template residual<double>(y);
  if (r.size() == 0 || r.cwiseAbs().maxCoeff() <= kFeasibilityTolerance) return y;
  const Matrix xi0 = c.template normals<double>(x);
  for (int it = 0; it < max_iterations; ++it) {
    const Matrix jac = c.template normals<double>(y).transpose() * xi0;
    Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible()) break;
    y -= xi0 * lu.solve(r);
    r = c.template residual<double>(y);
    if (!r.allFinite()) break;
    if (r.cwiseAbs().maxCoeff() <= kFeasibilityTolerance) return y;
  }
  throw RetractionError("Newton retraction did not converge in " +
                        std::to_string(max_iterations) + " iterations");
}

/// Orthonormal basis (n x d) of the tangent space, completing the normals by QR.
template <ConstraintSet C>
Matrix tangent_basis(const C& c, const Vector& x) {
  const Index n = c.ambient_dimension();
  const Index k = c.codimension();
  if (k == 0) return Matrix::Identity(n, n);
  const Matrix xi = c.template normals<double>(x);
  Eigen::HouseholderQR<Matrix> qr(xi);
  const Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  return q.rightCols(n - k);
}

/// Unit sphere S^{n-1} in R^n, c(x) = |x|^2 - 1.
class UnitSphere {
 public:
  explicit UnitSphere(Index n = 3) : n_(n) {}

  Index ambient_dimension() const { return n_; }
  Index codimension() const { return 1; }

  template <class T>
  VectorT<T> residual(const VectorT<T>& x) const {
    VectorT<T> r(1);
    r(0) = x.squaredNorm() - T(1.0);
    return r;
  }

  template <class T>
  MatrixT<T> normals(const VectorT<T>& x) const {
    return T(2.0) * x;
  }

  Vector retract(const Vector& x) const {
    const double norm = x.norm();
    if (!(norm > 1e-12) || !std::isfinite(norm)) {
      throw RetractionError("cannot normalize a vanishing vector onto the sphere");
    }
    return x / norm;
  }

  /// Great-circle interpolation between two points of the sphere.
  Vector geodesic(const Vector& x, const Vector& y, double t) const {
    const double cosine = std::clamp(x.dot(y), -1.0, 1.0);
    if (cosine <= -1.0 + 1e-12) {
      throw AmbiguousGeodesicError("antipodal points have no unique great circle");
    }
    const Vector perp = y - cosine * x;
    const double sine = perp.norm();
    if (sine <= 1e-15) return x;
    const double angle = std::atan2(sine, cosine);
    return retract(std::cos(t * angle) * x + std::sin(t * angle) * (perp / sine));
  }

 private:
  Index n_;
};

/// Cartesian product of constraint sets acting on disjoint coordinate blocks.
template <ConstraintSet... Factors>
class ProductManifold {
 public:
  static constexpr std::size_t kFactors = sizeof...(Factors);

  explicit ProductManifold(Factors... factors) : factors_(std::move(factors)...) {
    Index off = 0;
    Index coff = 0;
    std::size_t i = 0;
    std::apply(
        [&](const auto&... f) {
          ((offsets_[i] = off, coffsets_[i] = coff, off += f.ambient_dimension(),
            coff += f.codimension(), ++i),
           ...);
        },
        factors_);
    n_ = off;
    k_ = coff;
  }

  Index ambient_dimension() const { return n_; }
  Index codimension() const { return k_; }
  const std::tuple<Factors...>& factors() const { return factors_; }
  Index block_offset(std::size_t i) const { return offsets_[i]; }

  template <class T>
  VectorT<T> residual(const VectorT<T>& x) const {
    VectorT<T> r(k_);
    for_each_factor([&](const auto& f, Index off, Index coff) {
      const VectorT<T> xb = x.segment(off, f.ambient_dimension());
      r.segment(coff, f.codimension()) = f.template residual<T>(xb);
    });
    return r;
  }

  template <class T>
  MatrixT<T> normals(const VectorT<T>& x) const {
    MatrixT<T> xi = MatrixT<T>::Zero(n_, k_);
    for_each_factor([&](const auto& f, Index off, Index coff) {
      const VectorT<T> xb = x.segment(off, f.ambient_dimension());
      xi.block(off, coff, f.ambient_dimension(), f.codimension()) = f.template normals<T>(xb);
    });
    return xi;
  }

  Vector retract(const Vector& x) const {
    Vector y(n_);
    for_each_factor([&](const auto& f, Index off, Index) {
      y.segment(off, f.ambient_dimension()) = f.retract(x.segment(off, f.ambient_dimension()));
    });
    return y;
  }

  Vector geodesic(const Vector& x, const Vector& y, double t) const {
    Vector z(n_);
    for_each_factor([&](const auto& f, Index off, Index) {
      const Index m = f.ambient_dimension();
      z.segment(off, m) = f.geodesic(x.segment(off, m), y.segment(off, m), t);
    });
    return z;
  }

 private:
  template <class F>
  void for_each_factor(F&& fn) const {
    std::size_t i = 0;
    std::apply([&](const auto&... f) { ((fn(f, offsets_[i], coffsets_[i]), ++i), ...); },
               factors_);
  }

  std::tuple<Factors...> factors_;
  std::array<Index, kFactors> offsets_{};
  std::array<Index, kFactors> coffsets_{};
  Index n_ = 0;
  Index k_ = 0;
};

using SpherePair = ProductManifold<UnitSphere, UnitSphere>;

inline SpherePair sphere_pair() { return SpherePair(UnitSphere(3), UnitSphere(3)); }

}  // namespace cmam
