#pragma once

// Constrained minimum action method on the geometric action.
//
// A curve is a fixed number of images with pinned endpoints. Interior images
// move by limited-memory quasi-Newton steps built from the gradient projected
// onto each image's tangent space (with the along-curve component removed, as
// that direction only reparametrizes), are retracted onto the manifold after
// every step, and are periodically redistributed to equal Euclidean spacing.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cmam/action.hpp"
#include "cmam/curve.hpp"
#include "cmam/errors.hpp"
#include "cmam/manifold.hpp"
#include "cmam/models.hpp"
#include "cmam/parallel.hpp"

namespace cmam {

struct Route {
  std::string name;
  std::vector<Vector> waypoints;
};

struct SolverOptions {
  Index images = 200;  // number of segments N; the curve holds N + 1 images
  double gtol = 1e-8;
  int max_iterations = 20000;
  int reparam_stride = 5;
  int memory = 10;
  int max_halvings = 30;
  int stagnation_window = 50;
  double max_step = 0.05;  // largest trial displacement of any image
};

struct SolveReport {
  std::string label;
  Curve curve;
  double action = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;  // infinity norm of the projected gradient
  double max_residual = 0.0;
  bool converged = false;
  bool stagnated = false;
  std::string message;
};

/// Relative tolerance on gap uniformity reached by reparametrize().
inline constexpr double kSpacingTolerance = 1e-10;

namespace detail {

/// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson slopes).
class MonotoneCubic {
 public:
  MonotoneCubic(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)), slope_(x_.size(), 0.0) {
    const std::size_t n = x_.size();
    std::vector<double> delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) delta[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    slope_[0] = delta[0];
    slope_[n - 1] = delta[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] <= 0.0) continue;
      const double h0 = x_[i] - x_[i - 1], h1 = x_[i + 1] - x_[i];
      const double w0 = 2.0 * h1 + h0, w1 = h1 + 2.0 * h0;
      slope_[i] = (w0 + w1) / (w0 / delta[i - 1] + w1 / delta[i]);
    }
  }

  double operator()(double t) const {
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
    i = std::min(i, x_.size() - 2);
    const double h = x_[i + 1] - x_[i];
    const double s = (t - x_[i]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y_[i] + (s3 - 2 * s2 + s) * h * slope_[i] +
           (-2 * s3 + 3 * s2) * y_[i + 1] + (s3 - s2) * h * slope_[i + 1];
  }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> slope_;
};

inline double spacing_defect(const Curve& curve) {
  const Vector g = curve.gaps();
  const double mean = g.mean();
  if (!(mean > 0.0)) return std::numeric_limits<double>::infinity();
  return (g.array() - mean).abs().maxCoeff() / mean;
}

}  // namespace detail

/// Redistributes interior images to equal Euclidean chord length.
///
/// Each pass interpolates every coordinate against cumulative chord length by
/// monotone cubic Hermite splines, samples at equal arc length and retracts;
/// passes repeat until the chords agree to kSpacingTolerance.
template <ConstraintSet C>
Curve reparametrize(const Curve& curve, const C& manifold, int max_passes = 30) {
  const Index count = curve.image_count();
  if (count < 3) return curve;
  Curve out = curve;
  for (int pass = 0; pass < max_passes; ++pass) {
    if (detail::spacing_defect(out) <= kSpacingTolerance) break;
    std::vector<double> s(count, 0.0);
    for (Index i = 1; i < count; ++i) {
      s[i] = s[i - 1] + (out.points.col(i) - out.points.col(i - 1)).norm();
      if (!(s[i] > s[i - 1])) {
        throw InvalidRouteError("curve has coincident consecutive images");
      }
    }
    const double total = s.back();
    Matrix next = out.points;
    for (Index k = 0; k < out.dimension(); ++k) {
      std::vector<double> y(count);
      for (Index i = 0; i < count; ++i) y[i] = out.points(k, i);
      const detail::MonotoneCubic spline(s, std::move(y));
      for (Index i = 1; i + 1 < count; ++i) {
        next(k, i) = spline(total * static_cast<double>(i) / static_cast<double>(count - 1));
      }
    }
    for (Index i = 1; i + 1 < count; ++i) next.col(i) = manifold.retract(next.col(i));
    out.points = std::move(next);
  }
  return out;
}

/// Piecewise geodesic curve through the route's waypoints, equally spaced.
template <ConstraintSet C>
Curve initial_guess(const Route& route, Index segments, const C& manifold) {
  const auto& wp = route.waypoints;
  if (wp.size() < 2) throw InvalidRouteError("route '" + route.name + "' needs two waypoints");
  const Index legs = static_cast<Index>(wp.size()) - 1;
  if (segments < 2 * legs) {
    throw InvalidRouteError("route '" + route.name + "' needs at least " +
                            std::to_string(2 * legs) + " segments");
  }
  for (std::size_t i = 0; i < wp.size(); ++i) {
    if (wp[i].size() != manifold.ambient_dimension()) {
      throw InvalidRouteError("waypoint dimension does not match the manifold");
    }
    if (max_residual(manifold, wp[i]) > kPathFeasibility) {
      throw InvalidRouteError("waypoint " + std::to_string(i) + " of route '" + route.name +
                              "' is not on the manifold");
    }
    if (i > 0 && (wp[i] - wp[i - 1]).norm() <= 1e-12) {
      throw InvalidRouteError("route '" + route.name + "' repeats waypoint " + std::to_string(i));
    }
  }

  // Leg lengths from a fine polyline of each geodesic leg.
  constexpr int kProbe = 256;
  std::vector<double> leg_length(legs, 0.0);
  for (Index l = 0; l < legs; ++l) {
    Vector prev = wp[l];
    for (int j = 1; j <= kProbe; ++j) {
      Vector cur = manifold.geodesic(wp[l], wp[l + 1], static_cast<double>(j) / kProbe);
      leg_length[l] += (cur - prev).norm();
      prev = std::move(cur);
    }
  }
  double total = 0.0;
  for (double len : leg_length) total += len;

  Curve curve;
  curve.points.resize(manifold.ambient_dimension(), segments + 1);
  curve.points.col(0) = wp.front();
  curve.points.col(segments) = wp.back();
  Index leg = 0;
  double leg_start = 0.0;
  for (Index i = 1; i < segments; ++i) {
    const double s = total * static_cast<double>(i) / static_cast<double>(segments);
    while (leg + 1 < legs && s > leg_start + leg_length[leg]) {
      leg_start += leg_length[leg];
      ++leg;
    }
    const double t = std::clamp((s - leg_start) / leg_length[leg], 0.0, 1.0);
    curve.points.col(i) = manifold.geodesic(wp[leg], wp[leg + 1], t);
  }
  return reparametrize(curve, manifold);
}

namespace detail {

/// Tangent-space gradient with the along-curve component removed; endpoints zero.
template <ConstraintSet C>
Matrix project_gradient(const Matrix& points, const Matrix& gradient, const C& manifold) {
  Matrix pg = Matrix::Zero(points.rows(), points.cols());
  for (Index i = 1; i + 1 < points.cols(); ++i) {
    const Matrix xi = manifold.template normals<double>(Vector(points.col(i)));
    Vector g = project_tangent(gradient.col(i), xi);
    Vector tau = project_tangent(points.col(i + 1) - points.col(i - 1), xi);
    const double tn = tau.norm();
    if (tn > 0.0) {
      tau /= tn;
      g -= g.dot(tau) * tau;
    }
    pg.col(i) = g;
  }
  return pg;
}

inline double dot(const Matrix& a, const Matrix& b) { return (a.array() * b.array()).sum(); }

inline double inf_norm(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline double max_image_step(const Matrix& d) {
  double worst = 0.0;
  for (Index i = 0; i < d.cols(); ++i) worst = std::max(worst, d.col(i).norm());
  return worst;
}

template <ConstraintSet C>
Matrix step_points(const Matrix& points, const Matrix& direction, double t, const C& manifold) {
  Matrix out = points;
  for (Index i = 1; i + 1 < points.cols(); ++i) {
    out.col(i) = manifold.retract(points.col(i) + t * direction.col(i));
  }
  return out;
}

class LbfgsMemory {
 public:
  explicit LbfgsMemory(int capacity) : capacity_(capacity) {}

  void clear() { pairs_.clear(); }
  bool empty() const { return pairs_.empty(); }

  void push(Matrix s, Matrix y) {
    const double sy = dot(s, y);
    if (!(sy > 1e-12 * std::sqrt(dot(s, s) * dot(y, y)))) return;
    pairs_.push_back({std::move(s), std::move(y), 1.0 / sy});
    if (static_cast<int>(pairs_.size()) > capacity_) pairs_.pop_front();
  }

  /// Two-loop recursion: returns -H g.
  Matrix direction(const Matrix& g) const {
    Matrix q = g;
    std::vector<double> alpha(pairs_.size());
    for (std::size_t j = pairs_.size(); j-- > 0;) {
      alpha[j] = pairs_[j].rho * dot(pairs_[j].s, q);
      q -= alpha[j] * pairs_[j].y;
    }
    if (!pairs_.empty()) {
      const auto& last = pairs_.back();
      q *= dot(last.s, last.y) / dot(last.y, last.y);
    }
    for (std::size_t j = 0; j < pairs_.size(); ++j) {
      const double beta = pairs_[j].rho * dot(pairs_[j].y, q);
      q += (alpha[j] - beta) * pairs_[j].s;
    }
    return -q;
  }

 private:
  struct Pair {
    Matrix s;
    Matrix y;
    double rho;
  };
  int capacity_;
  std::deque<Pair> pairs_;
};

}  // namespace detail

/// Local minimizer of the discrete geometric action with pinned endpoints.
template <Model M, ConstraintSet C>
SolveReport minimize(const Curve& initial, const M& model, const C& manifold,
                     const SolverOptions& options = {}) {
  detail::require_segments(initial.image_count());
  detail::require_feasible(manifold, initial.points);

  SolveReport report;
  Matrix x = initial.points;
  Matrix grad;
  auto evaluate = [&](const Matrix& pts, Matrix* g) {
    return geometric_action_gradient(pts, model, manifold, g);
  };

  double f = evaluate(x, &grad);
  Matrix pg = detail::project_gradient(x, grad, manifold);
  detail::LbfgsMemory memory(options.memory);

  double best = f;
  int since_best = 0;
  int iteration = 0;
  for (; iteration < options.max_iterations; ++iteration) {
    const double gnorm = detail::inf_norm(pg);
    if (gnorm <= options.gtol && detail::spacing_defect(Curve{x}) <= 1e-6) {
      report.converged = true;
      break;
    }
    if (since_best >= options.stagnation_window) {
      report.stagnated = true;
      report.message = "action did not decrease over " +
                       std::to_string(options.stagnation_window) + " iterations";
      break;
    }

    Matrix d = detail::project_gradient(x, memory.direction(pg), manifold);
    double slope = detail::dot(pg, d);
    if (!(slope < 0.0)) {
      memory.clear();
      d = -pg;
      slope = -detail::dot(pg, pg);
    }

    // Backtracking on the retracted step. A step whose action rises by no more
    // than rounding noise is still taken when it lowers the gradient.
    bool accepted = false;
    Matrix x_new, grad_new, pg_new;
    double f_new = f;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      double t = 1.0;
      const double longest = detail::max_image_step(d);
      if (longest * t > options.max_step) t = options.max_step / longest;
      for (int halving = 0; halving <= options.max_halvings; ++halving, t *= 0.5) {
        try {
          x_new = detail::step_points(x, d, t, manifold);
        } catch (const RetractionError&) {
          continue;
        }
        f_new = evaluate(x_new, &grad_new);
        if (!std::isfinite(f_new)) continue;
        if (f_new <= f + 1e-4 * t * slope) {
          accepted = true;
        } else if (f_new <= f + 1e-14 * std::abs(f)) {
          pg_new = detail::project_gradient(x_new, grad_new, manifold);
          accepted = detail::inf_norm(pg_new) < gnorm;
        }
        if (accepted) break;
      }
      if (!accepted) {
        if (memory.empty()) break;
        memory.clear();
        d = -pg;
        slope = -detail::dot(pg, pg);
      }
    }
    if (!accepted) {
      report.message = "line search failed";
      break;
    }

    if (pg_new.size() == 0) pg_new = detail::project_gradient(x_new, grad_new, manifold);
    memory.push(x_new - x, pg_new - pg);
    x = std::move(x_new);
    f = f_new;
    grad = std::move(grad_new);
    pg = std::move(pg_new);
    pg_new.resize(0, 0);

    if (options.reparam_stride > 0 && (iteration + 1) % options.reparam_stride == 0) {
      x = reparametrize(Curve{x}, manifold).points;
      f = evaluate(x, &grad);
      pg = detail::project_gradient(x, grad, manifold);
      // Redistributing images moves the discrete action by O(h^2); only the
      // descent steps are judged for stagnation.
      best = std::max(best, f);
    }

    if (f < best - 1e-15 * std::abs(best)) {
      best = f;
      since_best = 0;
    } else {
      ++since_best;
    }
  }

  report.iterations = iteration;
  report.curve = Curve{x};
  report.gradient_norm = detail::inf_norm(pg);
  report.max_residual = max_path_residual(manifold, x);
  report.action = geometric_action(report.curve, model, manifold);
  if (!report.converged && report.message.empty()) report.message = "iteration limit reached";
  return report;
}

struct MultistartResult {
  std::vector<std::optional<SolveReport>> reports;  // one per route, in route order
  std::vector<std::string> failures;                // empty string when the route succeeded
  std::size_t global = 0;                           // index of the least-action route
};

/// Solves every route (optionally from warm-start curves) and picks the least action.
///
/// Ties go to the earlier route.
template <Model M, ConstraintSet C>
MultistartResult multistart(const std::vector<Route>& routes, const M& model, const C& manifold,
                            const SolverOptions& options, std::size_t workers = 1,
                            const std::vector<std::optional<Curve>>& warm = {}) {
  if (routes.empty()) throw InvalidRouteError("multistart needs at least one route");
  MultistartResult result;
  result.reports.resize(routes.size());
  result.failures.assign(routes.size(), std::string());
  parallel_for(routes.size(), workers, [&](std::size_t i) {
    try {
      const Curve start = (i < warm.size() && warm[i].has_value())
                              ? *warm[i]
                              : initial_guess(routes[i], options.images, manifold);
      SolveReport r = minimize(start, model, manifold, options);
      r.label = routes[i].name;
      result.reports[i] = std::move(r);
    } catch (const Error& e) {
      result.failures[i] = e.what();
    }
  });
  bool any = false;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    if (!result.reports[i]) continue;
    if (!any || result.reports[i]->action < result.reports[result.global]->action) {
      result.global = i;
      any = true;
    }
  }
  if (!any) {
    std::string why;
    for (std::size_t i = 0; i < routes.size(); ++i) {
      why += "\n  " + routes[i].name + ": " + result.failures[i];
    }
    throw AllRoutesFailedError("every route failed:" + why);
  }
  return result;
}

}  // namespace cmam
