#pragma once

// Action functionals for projected diffusions on a constraint manifold.
//
// All functionals are discretized on segments: the velocity (or curve tangent)
// of segment i is the difference quotient of its two end images, which is the
// central difference at the segment midpoint, and the integrand is evaluated at
// that midpoint (composite midpoint rule). Velocities are projected onto the
// tangent space before use.
//
//   fw       1/2 int | pinv(phidot - Pi b) |_a^2 dt
//   s1       1/2 int | phidot - Pi b |_a^2 dt
//   geometric    int |B|_a |pinv(phi')|_a - <B, phi'>_a dalpha,  B = pinv(Pi b)

#include <Eigen/Dense>
#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "cmam/curve.hpp"
#include "cmam/errors.hpp"
#include "cmam/manifold.hpp"
#include "cmam/models.hpp"
#include "cmam/wlinalg.hpp"

namespace cmam {

/// Images of a path must satisfy the constraints to this absolute tolerance.
inline constexpr double kPathFeasibility = 1e-8;

namespace detail {

template <ConstraintSet C>
void require_feasible(const C& manifold, const Matrix& points) {
  for (Index i = 0; i < points.cols(); ++i) {
    const double r = max_residual(manifold, Vector(points.col(i)));
    if (!(r <= kPathFeasibility)) {
      throw InfeasiblePathError("image " + std::to_string(i) + " violates the constraints by " +
                                std::to_string(r));
    }
  }
}

inline void require_segments(Index images) {
  if (images < 2) throw InfeasiblePathError("a path needs at least two images");
}

/// Pieces shared by every evaluation at one point.
struct LocalFrame {
  Matrix xi;
  Matrix a;
  Vector projected_drift;
  Vector drift_pinv;  // B = pinv(Pi b)
};

template <Model M, ConstraintSet C>
LocalFrame local_frame(const M& model, const C& manifold, const Vector& x) {
  LocalFrame f;
  f.xi = manifold.template normals<double>(x);
  f.a = diffusion_tensor(model, x);
  f.projected_drift = project_tangent(drift(model, x), f.xi);
  f.drift_pinv = pinv_apply(f.projected_drift, f.xi, f.a);
  return f;
}

inline void require_nonnegative(double value, const char* what) {
  if (!(value >= -1e-12 * (1.0 + std::abs(value)))) {
    throw std::logic_error(std::string(what) + " evaluated to a negative value");
  }
}

}  // namespace detail

/// Geometric-action integrand |B|_a |pinv(Pi t)|_a - <B, Pi t>_a at x with tangent t.
template <Model M, ConstraintSet C>
double geometric_integrand(const M& model, const C& manifold, const Vector& x,
                           const Vector& tangent) {
  const auto f = detail::local_frame(model, manifold, x);
  const Vector pt = project_tangent(tangent, f.xi);
  const Vector nu = pinv_apply(pt, f.xi, f.a);
  return a_norm(f.drift_pinv, f.a) * a_norm(nu, f.a) - a_inner(f.drift_pinv, pt, f.a);
}

template <Model M, ConstraintSet C>
double geometric_action(const Curve& curve, const M& model, const C& manifold) {
  detail::require_segments(curve.image_count());
  detail::require_feasible(manifold, curve.points);
  const double h = curve.step();
  double total = 0.0;
  for (Index i = 0; i < curve.segment_count(); ++i) {
    const Vector mid = 0.5 * (curve.points.col(i) + curve.points.col(i + 1));
    const Vector tangent = (curve.points.col(i + 1) - curve.points.col(i)) / h;
    total += h * geometric_integrand(model, manifold, mid, tangent);
  }
  detail::require_nonnegative(total, "geometric action");
  return total;
}

/// Closed form for two rods with block-isotropic noise and unit-sphere factors.
inline double two_rod_geometric_action(const Curve& curve, const TwoRod& model) {
  detail::require_segments(curve.image_count());
  detail::require_feasible(sphere_pair(), curve.points);
  const double s1 = model.params().sigma1 * model.params().sigma1;
  const double s2 = model.params().sigma2 * model.params().sigma2;
  const double h = curve.step();
  auto tangential = [](const Eigen::Vector3d& u, const Eigen::Vector3d& at) {
    return Eigen::Vector3d(u - (u.dot(at) / at.squaredNorm()) * at);
  };
  double total = 0.0;
  for (Index i = 0; i < curve.segment_count(); ++i) {
    const Vector mid = 0.5 * (curve.points.col(i) + curve.points.col(i + 1));
    const Vector dphi = (curve.points.col(i + 1) - curve.points.col(i)) / h;
    const Vector b = drift(model, mid);
    const Eigen::Vector3d m1 = mid.head(3), m2 = mid.tail(3);
    const Eigen::Vector3d b1 = tangential(b.head(3), m1), b2 = tangential(b.tail(3), m2);
    const Eigen::Vector3d v1 = tangential(dphi.head(3), m1), v2 = tangential(dphi.tail(3), m2);
    const double drift_norm = std::sqrt(b1.squaredNorm() / s1 + b2.squaredNorm() / s2);
    const double speed = std::sqrt(v1.squaredNorm() / s1 + v2.squaredNorm() / s2);
    total += h * (drift_norm * speed - b1.dot(v1) / s1 - b2.dot(v2) / s2);
  }
  detail::require_nonnegative(total, "geometric action");
  return total;
}

namespace detail {

template <Model M, ConstraintSet C, class Integrand>
double time_action(const TimePath& path, const M& model, const C& manifold, Integrand&& term) {
  require_segments(path.points.cols());
  require_feasible(manifold, path.points);
  if (!(path.horizon > 0.0)) throw InfeasiblePathError("time horizon must be positive");
  const double dt = path.time_step();
  double total = 0.0;
  for (Index i = 0; i < path.segment_count(); ++i) {
    const Vector mid = 0.5 * (path.points.col(i) + path.points.col(i + 1));
    const Vector velocity = (path.points.col(i + 1) - path.points.col(i)) / dt;
    total += dt * 0.5 * term(local_frame(model, manifold, mid), velocity);
  }
  require_nonnegative(total, "action");
  return total;
}

}  // namespace detail

/// Freidlin-Wentzell action of the projected diffusion over a fixed horizon.
template <Model M, ConstraintSet C>
double fw_action(const TimePath& path, const M& model, const C& manifold) {
  return detail::time_action(path, model, manifold,
                             [](const detail::LocalFrame& f, const Vector& velocity) {
                               const Vector w = project_tangent(velocity, f.xi) - f.projected_drift;
                               const Vector u = pinv_apply(w, f.xi, f.a);
                               return a_inner(u, u, f.a);
                             });
}

/// Action of the unprojected-noise comparison dynamics; never below fw_action.
template <Model M, ConstraintSet C>
double s1_action(const TimePath& path, const M& model, const C& manifold) {
  return detail::time_action(path, model, manifold,
                             [](const detail::LocalFrame& f, const Vector& velocity) {
                               const Vector w = project_tangent(velocity, f.xi) - f.projected_drift;
                               return a_inner(w, w, f.a);
                             });
}

/// Tangent of the curve at image i: central differences inside, one-sided at the ends.
inline Vector curve_tangent(const Curve& curve, Index i) {
  const Index last = curve.segment_count();
  const double h = curve.step();
  if (i == 0) return (curve.points.col(1) - curve.points.col(0)) / h;
  if (i == last) return (curve.points.col(last) - curve.points.col(last - 1)) / h;
  return (curve.points.col(i + 1) - curve.points.col(i - 1)) / (2.0 * h);
}

/// Threshold on |pinv(phi')|_a below which the time change is undefined.
inline constexpr double kDegenerateTangent = 1e-14;

namespace detail {

template <Model M, ConstraintSet C>
double lambda_at(const M& model, const C& manifold, const Vector& x, const Vector& tangent) {
  const auto f = local_frame(model, manifold, x);
  const Vector nu = pinv_apply(project_tangent(tangent, f.xi), f.xi, f.a);
  const double nu_norm = a_norm(nu, f.a);
  if (!(nu_norm >= kDegenerateTangent)) {
    throw DegenerateParametrizationError("curve tangent vanishes; time change undefined");
  }
  return a_norm(f.drift_pinv, f.a) / nu_norm;
}

}  // namespace detail

/// lambda = d alpha / dt = |B|_a / |pinv(phi')|_a at image i.
template <Model M, ConstraintSet C>
double time_change_lambda(const Curve& curve, const M& model, const C& manifold, Index i) {
  detail::require_segments(curve.image_count());
  return detail::lambda_at(model, manifold, curve.image(i), curve_tangent(curve, i));
}

/// Geometric-action integrand at image i (diagnostic output).
template <Model M, ConstraintSet C>
double image_integrand(const Curve& curve, const M& model, const C& manifold, Index i) {
  return geometric_integrand(model, manifold, curve.image(i), curve_tangent(curve, i));
}

struct TimeReconstructionOptions {
  double lambda_min = 1e-8;
  /// Uniform time samples of the output path; 0 selects 50 per curve segment.
  Index samples = 0;
};

struct TimeReconstruction {
  TimePath path;
  Vector image_times;  // physical time at each curve image
  int clamped = 0;     // segments where lambda was raised to lambda_min
};

/// Physical-time parametrization of a curve from dt = dalpha / lambda.
///
/// lambda is taken at segment midpoints so that the fixed points sitting at the
/// end images do not produce infinite durations; values below lambda_min are
/// clamped and counted.
template <Model M, ConstraintSet C>
TimeReconstruction reconstruct_time(const Curve& curve, const M& model, const C& manifold,
                                    const TimeReconstructionOptions& options = {}) {
  detail::require_segments(curve.image_count());
  detail::require_feasible(manifold, curve.points);
  const Index segments = curve.segment_count();
  const double h = curve.step();

  TimeReconstruction out;
  out.image_times = Vector::Zero(curve.image_count());
  for (Index i = 0; i < segments; ++i) {
    const Vector mid = 0.5 * (curve.points.col(i) + curve.points.col(i + 1));
    const Vector tangent = (curve.points.col(i + 1) - curve.points.col(i)) / h;
    double lambda = detail::lambda_at(model, manifold, mid, tangent);
    if (!std::isfinite(lambda)) {
      throw DegenerateParametrizationError("non-finite time change at segment " +
                                           std::to_string(i));
    }
    if (lambda < options.lambda_min) {
      lambda = options.lambda_min;
      ++out.clamped;
    }
    out.image_times(i + 1) = out.image_times(i) + h / lambda;
  }

  const double horizon = out.image_times(segments);
  const Index samples = options.samples > 0 ? options.samples : 50 * segments;
  out.path.horizon = horizon;
  out.path.points.resize(curve.dimension(), samples + 1);
  Index seg = 0;
  for (Index k = 0; k <= samples; ++k) {
    if (k == 0) {
      out.path.points.col(k) = curve.points.col(0);
      continue;
    }
    if (k == samples) {
      out.path.points.col(k) = curve.points.col(segments);
      continue;
    }
    const double t = horizon * static_cast<double>(k) / static_cast<double>(samples);
    while (seg + 1 < segments && out.image_times(seg + 1) < t) ++seg;
    const double t0 = out.image_times(seg), t1 = out.image_times(seg + 1);
    const double w = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    const Vector x = (1.0 - w) * curve.points.col(seg) + w * curve.points.col(seg + 1);
    out.path.points.col(k) = manifold.retract(x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Differentiable form used by the optimizer.
//
// With Q = a^{-1} - a^{-1} Xi M^{-1} Xi^T a^{-1} the geometric integrand reads
// sqrt(b'Qb) sqrt(v'Qv) - b'Qv; this is algebraically identical to the
// pseudo-inverse form above and is differentiated by forward-mode AD.

namespace detail {

using JetDerivatives = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 16, 1>;
using Jet = Eigen::AutoDiffScalar<JetDerivatives>;
inline constexpr Index kMaxJetDimension = 8;

inline double value_of(double x) { return x; }
inline double value_of(const Jet& x) { return x.value(); }

template <class T>
T safe_sqrt(const T& x) {
  using std::sqrt;
  if (value_of(x) > 0.0) return sqrt(x);
  return T(0.0);
}

template <class Mt>
concept DiagonalMetric = Metric<Mt> && requires(const Mt& m) {
  { m.inverse_diagonal() } -> std::convertible_to<Vector>;
};

// Q u for a constant diagonal a^{-1} = diag(d): only the K x K Gram matrix of
// the normals is factorized.
template <class T>
VectorT<T> apply_diagonal_q(const Vector& d, const MatrixT<T>& xi, const VectorT<T>& u) {
  const MatrixT<T> dxi = d.cast<T>().asDiagonal() * xi;
  const MatrixT<T> gram = xi.transpose() * dxi;
  const VectorT<T> coef = gram.ldlt().solve(dxi.transpose() * u);
  return d.cast<T>().cwiseProduct(u) - dxi * coef;
}

template <class T, Model M, ConstraintSet C>
T tangent_integrand(const M& model, const C& manifold, const VectorT<T>& x, const VectorT<T>& v) {
  const VectorT<T> b = model.template drift<T>(x);
  const MatrixT<T> xi = manifold.template normals<T>(x);
  VectorT<T> qb, qv;
  if constexpr (DiagonalMetric<std::decay_t<decltype(model.metric())>>) {
    const Vector d = model.metric().inverse_diagonal();
    qb = apply_diagonal_q<T>(d, xi, b);
    qv = apply_diagonal_q<T>(d, xi, v);
  } else {
    const MatrixT<T> q = tangent_metric<T>(model.metric().template tensor<T>(x), xi);
    qb = q * b;
    qv = q * v;
  }
  return safe_sqrt(T(b.dot(qb) * v.dot(qv))) - v.dot(qb);
}

}  // namespace detail

/// Discrete geometric action and its gradient with respect to every image.
template <Model M, ConstraintSet C>
double geometric_action_gradient(const Matrix& points, const M& model, const C& manifold,
                                 Matrix* gradient) {
  using detail::Jet;
  const Index n = points.rows();
  const Index segments = points.cols() - 1;
  if (n > detail::kMaxJetDimension) {
    throw std::invalid_argument("ambient dimension too large for the AD gradient");
  }
  const double h = 1.0 / static_cast<double>(segments);
  if (gradient != nullptr) gradient->setZero(n, points.cols());

  double total = 0.0;
  VectorT<Jet> x(n), v(n);
  for (Index i = 0; i < segments; ++i) {
    const Vector mid = 0.5 * (points.col(i) + points.col(i + 1));
    const Vector tangent = (points.col(i + 1) - points.col(i)) / h;
    if (gradient == nullptr) {
      total += h * detail::tangent_integrand<double>(model, manifold, mid, tangent);
      continue;
    }
    for (Index k = 0; k < n; ++k) {
      x(k) = Jet(mid(k), 2 * n, k);
      v(k) = Jet(tangent(k), 2 * n, n + k);
    }
    const Jet f = detail::tangent_integrand<Jet>(model, manifold, x, v);
    total += h * f.value();
    const auto& d = f.derivatives();
    if (d.size() != 2 * n) continue;  // constant integrand (e.g. zero drift)
    const Vector dx = d.head(n);
    const Vector dv = d.tail(n);
    gradient->col(i) += 0.5 * h * dx - dv;
    gradient->col(i + 1) += 0.5 * h * dx + dv;
  }
  return total;
}

}  // namespace cmam
