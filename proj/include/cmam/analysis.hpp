#pragma once

// Fixed points of the projected drift, their linear stability on the tangent
// space, and parameter scans that track which route carries the least action.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "cmam/errors.hpp"
#include "cmam/mam.hpp"
#include "cmam/manifold.hpp"
#include "cmam/models.hpp"
#include "cmam/parallel.hpp"
#include "cmam/wlinalg.hpp"

namespace cmam {

enum class Stability { Sink, Saddle, Source };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::Sink: return "sink";
    case Stability::Saddle: return "saddle";
    case Stability::Source: return "source";
  }
  return "?";
}

inline constexpr double kFixedPointTolerance = 1e-10;
inline constexpr double kMarginalThreshold = 1e-6;
inline constexpr double kJacobianStep = 1e-6;
inline constexpr double kDuplicateDistance = 1e-6;

struct FixedPointRecord {
  Vector location;
  std::vector<std::complex<double>> eigenvalues;  // sorted by real part, descending
  Stability kind = Stability::Sink;
  int index = 0;  // eigenvalues with positive real part
  std::string label;
};

namespace detail {

/// Jacobian of the projected drift in an orthonormal tangent basis at x.
template <Model M, ConstraintSet C>
Matrix tangent_jacobian(const M& model, const C& manifold, const Vector& x, const Matrix& basis,
                        double step) {
  const Index d = basis.cols();
  Matrix jac(d, d);
  for (Index j = 0; j < d; ++j) {
    const Vector plus = manifold.retract(x + step * basis.col(j));
    const Vector minus = manifold.retract(x - step * basis.col(j));
    const Vector diff = projected_drift(model, manifold, plus) - projected_drift(model, manifold, minus);
    jac.col(j) = basis.transpose() * diff / (2.0 * step);
  }
  return jac;
}

}  // namespace detail

/// Generic label: the model-specific overloads below take precedence.
template <class M>
std::string fixed_point_label(const M& /*model*/, const Vector& /*x*/, Stability kind) {
  return to_string(kind);
}

/// si/sa/so with the sign of the e1/e2/e3 component respectively.
inline std::string fixed_point_label(const SingleRod& /*model*/, const Vector& x, Stability kind) {
  const char* stem = kind == Stability::Sink ? "si" : kind == Stability::Saddle ? "sa" : "so";
  const Index axis = kind == Stability::Sink ? 0 : kind == Stability::Saddle ? 1 : 2;
  return std::string(stem) + (x(axis) >= 0.0 ? "+" : "-");
}

namespace detail {

/// "+e1", "-e3", ... when x is a signed coordinate vector to within tol.
inline std::optional<std::string> axis_name(const Vector& x, double tol = 1e-6) {
  Index k = 0;
  x.cwiseAbs().maxCoeff(&k);
  Vector e = Vector::Zero(x.size());
  e(k) = x(k) >= 0.0 ? 1.0 : -1.0;
  if ((x - e).norm() > tol) return std::nullopt;
  return std::string(x(k) >= 0.0 ? "+" : "-") + "e" + std::to_string(k + 1);
}

}  // namespace detail

/// Quadrant names (si1..si4, sa1..sa5) for points in the e1-e2 plane with
/// angles in [0, pi]^2; other coordinate fixed points read "(+e1,-e3)".
inline std::string fixed_point_label(const TwoRod& /*model*/, const Vector& x, Stability kind) {
  struct Named {
    const char* name;
    const char* a;
    const char* b;
  };
  static constexpr Named kTable[] = {
      {"si1", "+e1", "+e1"}, {"si2", "+e1", "-e1"}, {"si3", "-e1", "+e1"}, {"si4", "-e1", "-e1"},
      {"sa1", "+e2", "+e1"}, {"sa2", "+e1", "+e2"}, {"sa3", "+e2", "-e1"}, {"sa4", "-e1", "+e2"},
      {"sa5", "+e2", "+e2"},
  };
  const auto a = detail::axis_name(x.head(3));
  const auto b = detail::axis_name(x.tail(3));
  if (!a || !b) return to_string(kind);
  for (const auto& row : kTable) {
    if (*a == row.a && *b == row.b) return row.name;
  }
  return "(" + *a + "," + *b + ")";
}

/// Eigenvalues of the tangent Jacobian at x, sorted by real part (descending).
template <Model M, ConstraintSet C>
std::vector<std::complex<double>> tangent_eigenvalues(const M& model, const C& manifold,
                                                      const Vector& x) {
  const Matrix basis = tangent_basis(manifold, x);
  const Matrix jac = detail::tangent_jacobian(model, manifold, x, basis, kJacobianStep);
  Eigen::EigenSolver<Matrix> eig(jac, /*computeEigenvectors=*/false);
  std::vector<std::complex<double>> out;
  for (Index i = 0; i < jac.rows(); ++i) out.push_back(eig.eigenvalues()(i));
  std::sort(out.begin(), out.end(), [](const auto& l, const auto& r) {
    return l.real() != r.real() ? l.real() > r.real() : l.imag() > r.imag();
  });
  return out;
}

/// Linear stability of a fixed point on the tangent space.
///
/// Throws MarginalStabilityError when a real part lies within 1e-6 of zero.
template <Model M, ConstraintSet C>
FixedPointRecord classify_fixed_point(const M& model, const C& manifold, const Vector& x) {
  const double residual = projected_drift(model, manifold, x).norm();
  if (residual > 1e-8) {
    throw DomainError("not a fixed point: |projected drift| = " + std::to_string(residual));
  }
  FixedPointRecord rec;
  rec.location = x;
  rec.eigenvalues = tangent_eigenvalues(model, manifold, x);
  for (const auto& lambda : rec.eigenvalues) {
    if (std::abs(lambda.real()) <= kMarginalThreshold) {
      throw MarginalStabilityError("eigenvalue with real part " + std::to_string(lambda.real()) +
                                   " is too close to zero to classify");
    }
    if (lambda.real() > 0.0) ++rec.index;
  }
  const int d = static_cast<int>(rec.eigenvalues.size());
  rec.kind = rec.index == 0 ? Stability::Sink : rec.index == d ? Stability::Source : Stability::Saddle;
  rec.label = fixed_point_label(model, x, rec.kind);
  return rec;
}

struct NewtonOptions {
  int max_iterations = 50;
  double tolerance = 1e-12;  // on |projected drift|
  double step = 1e-7;        // finite-difference step for the Jacobian
};

/// Damped Newton on the projected drift in tangent coordinates at the iterate.
template <Model M, ConstraintSet C>
std::optional<Vector> newton_fixed_point(const M& model, const C& manifold, const Vector& seed,
                                         const NewtonOptions& options = {}) {
  Vector x = manifold.retract(seed);
  double r = projected_drift(model, manifold, x).norm();
  for (int it = 0; it < options.max_iterations; ++it) {
    if (r <= options.tolerance) return x;
    const Matrix basis = tangent_basis(manifold, x);
    const Matrix jac = detail::tangent_jacobian(model, manifold, x, basis, options.step);
    const Vector f = basis.transpose() * projected_drift(model, manifold, x);
    Eigen::ColPivHouseholderQR<Matrix> qr(jac);
    if (qr.rank() < jac.cols()) return std::nullopt;
    Vector dy = -qr.solve(f);
    // Keep steps on the scale of the manifold's curvature.
    if (dy.norm() > 0.5) dy *= 0.5 / dy.norm();
    bool moved = false;
    for (double t = 1.0; t >= 1.0 / 1024.0; t *= 0.5) {
      const Vector trial = manifold.retract(x + t * basis * dy);
      const double rt = projected_drift(model, manifold, trial).norm();
      if (rt < r) {
        x = trial;
        r = rt;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  if (r <= options.tolerance) return x;
  return std::nullopt;
}

struct FixedPointSearch {
  std::vector<FixedPointRecord> points;  // in order of first discovery
  std::vector<Vector> marginal;          // converged but refused by classification
  std::vector<std::string> diagnostics;  // one line per skipped seed
};

/// Newton from each seed, deduplicated at distance 1e-6, then classified.
template <Model M, ConstraintSet C>
FixedPointSearch find_fixed_points(const M& model, const C& manifold,
                                   const std::vector<Vector>& seeds) {
  FixedPointSearch out;
  std::vector<Vector> found;
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    if (max_residual(manifold, seeds[s]) > 1e-8) {
      out.diagnostics.push_back("seed " + std::to_string(s) + ": not feasible");
      continue;
    }
    std::optional<Vector> x;
    try {
      x = newton_fixed_point(model, manifold, seeds[s]);
    } catch (const Error& e) {
      out.diagnostics.push_back("seed " + std::to_string(s) + ": " + e.what());
      continue;
    }
    if (!x) {
      out.diagnostics.push_back("seed " + std::to_string(s) + ": Newton did not converge");
      continue;
    }
    const bool duplicate = std::any_of(found.begin(), found.end(), [&](const Vector& y) {
      return (y - *x).norm() <= kDuplicateDistance;
    });
    if (duplicate) continue;
    if (projected_drift(model, manifold, *x).norm() > kFixedPointTolerance) {
      out.diagnostics.push_back("seed " + std::to_string(s) + ": polish above tolerance");
      continue;
    }
    found.push_back(*x);
    try {
      out.points.push_back(classify_fixed_point(model, manifold, *x));
    } catch (const MarginalStabilityError&) {
      out.marginal.push_back(*x);
    }
  }
  return out;
}

/// Signed coordinate axes on every sphere factor (all combinations) followed by
/// `random_count` uniformly distributed feasible points.
template <ConstraintSet C>
std::vector<Vector> canonical_seeds(const C& manifold, std::size_t random_count,
                                    std::uint64_t seed = 0) {
  std::vector<std::vector<Vector>> per_factor;
  auto axes = [](Index dim) {
    std::vector<Vector> v;
    for (Index i = 0; i < dim; ++i) {
      for (double s : {1.0, -1.0}) {
        Vector e = Vector::Zero(dim);
        e(i) = s;
        v.push_back(e);
      }
    }
    return v;
  };
  if constexpr (requires { manifold.factors(); }) {
    std::apply([&](const auto&... f) { (per_factor.push_back(axes(f.ambient_dimension())), ...); },
               manifold.factors());
  } else {
    per_factor.push_back(axes(manifold.ambient_dimension()));
  }

  std::vector<Vector> seeds{Vector(0)};
  for (const auto& choices : per_factor) {
    std::vector<Vector> next;
    for (const auto& head : seeds) {
      for (const auto& c : choices) {
        Vector v(head.size() + c.size());
        v << head, c;
        next.push_back(v);
      }
    }
    seeds = std::move(next);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const Index n = manifold.ambient_dimension();
  for (std::size_t k = 0; k < random_count; ++k) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = normal(rng);
    seeds.push_back(manifold.retract(v));
  }
  return seeds;
}

// ---------------------------------------------------------------------------
// Parameter scans

struct ScanRow {
  double parameter = 0.0;
  MultistartResult result;
};

struct Crossing {
  double lower = 0.0;  // final bisection bracket
  double upper = 0.0;
  double parameter = 0.0;  // bracket midpoint
  std::string from;        // global route label below the crossing
  std::string to;
};

struct ScanOptions {
  SolverOptions solver;
  std::size_t workers = 1;
  bool warm_start = true;
  int refinement = 32;  // bracket width target: grid step / refinement
};

struct ScanResult {
  std::vector<ScanRow> rows;
  std::vector<Crossing> crossings;
  bool warm_started = false;
  bool aborted = false;
  std::string message;
};

namespace detail {

inline std::vector<std::optional<Curve>> warm_curves(const MultistartResult& r,
                                                     const std::vector<Route>& routes) {
  std::vector<std::optional<Curve>> warm(routes.size());
  for (std::size_t i = 0; i < routes.size() && i < r.reports.size(); ++i) {
    if (!r.reports[i]) continue;
    const Curve& c = r.reports[i]->curve;
    const auto& w = routes[i].waypoints;
    if (w.empty()) continue;
    // Endpoints may move with the parameter; only reuse curves that still fit.
    if ((c.points.col(0) - w.front()).norm() > 1e-12) continue;
    if ((c.points.col(c.segment_count()) - w.back()).norm() > 1e-12) continue;
    warm[i] = c;
  }
  return warm;
}

}  // namespace detail

/// Multistart at every grid value, then bisection on the action difference of
/// the two routes wherever the global route changes between neighbours.
///
/// `family(p)` builds the model and `routes(p)` the route list at parameter p;
/// every grid point must produce routes with the same names in the same order.
template <class Family, class RouteFactory, ConstraintSet C>
ScanResult bifurcation_scan(Family&& family, const std::vector<double>& grid,
                            RouteFactory&& routes, const C& manifold,
                            const ScanOptions& options = {}) {
  if (grid.empty()) throw std::invalid_argument("parameter grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("parameter grid must increase");
  }

  ScanResult out;
  out.warm_started = options.warm_start;
  auto solve_at = [&](double p, const std::vector<std::optional<Curve>>& warm) {
    const auto model = family(p);
    return multistart(routes(p), model, manifold, options.solver, options.workers, warm);
  };

  if (options.warm_start) {
    for (double p : grid) {
      const auto rs = routes(p);
      std::vector<std::optional<Curve>> warm;
      if (!out.rows.empty()) warm = detail::warm_curves(out.rows.back().result, rs);
      try {
        out.rows.push_back({p, solve_at(p, warm)});
      } catch (const AllRoutesFailedError& e) {
        out.aborted = true;
        out.message = "at parameter " + std::to_string(p) + ": " + e.what();
        return out;
      }
    }
  } else {
    std::vector<std::optional<ScanRow>> rows(grid.size());
    std::vector<std::string> errors(grid.size());
    parallel_for(grid.size(), options.workers, [&](std::size_t i) {
      try {
        rows[i] = ScanRow{grid[i], solve_at(grid[i], {})};
      } catch (const AllRoutesFailedError& e) {
        errors[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < grid.size(); ++i) {
      if (!rows[i]) {
        out.aborted = true;
        out.message = "at parameter " + std::to_string(grid[i]) + ": " + errors[i];
        return out;
      }
      out.rows.push_back(std::move(*rows[i]));
    }
  }

  for (std::size_t k = 0; k + 1 < out.rows.size(); ++k) {
    const auto& lo = out.rows[k];
    const auto& hi = out.rows[k + 1];
    const std::size_t a = lo.result.global;
    const std::size_t b = hi.result.global;
    if (a == b) continue;
    Crossing c;
    c.from = lo.result.reports[a]->label;
    c.to = hi.result.reports[b]->label;
    c.lower = lo.parameter;
    c.upper = hi.parameter;
    // Warm curves for the two competing routes from each side of the bracket.
    auto lo_warm = detail::warm_curves(lo.result, routes(c.lower));
    auto hi_warm = detail::warm_curves(hi.result, routes(c.upper));
    const double target = (hi.parameter - lo.parameter) / options.refinement;
    while (c.upper - c.lower > target * (1.0 + 1e-9)) {
      const double mid = 0.5 * (c.lower + c.upper);
      auto rs = routes(mid);
      std::vector<Route> pair{rs[a], rs[b]};
      const auto& near = (mid - c.lower <= c.upper - mid) ? lo_warm : hi_warm;
      std::vector<std::optional<Curve>> warm{near[a], near[b]};
      const auto model = family(mid);
      MultistartResult r;
      try {
        r = multistart(pair, model, manifold, options.solver, options.workers, warm);
      } catch (const AllRoutesFailedError&) {
        break;
      }
      if (!r.reports[0] || !r.reports[1]) break;
      const double diff = r.reports[0]->action - r.reports[1]->action;
      auto& side = diff <= 0.0 ? lo_warm : hi_warm;
      side[a] = r.reports[0]->curve;
      side[b] = r.reports[1]->curve;
      (diff <= 0.0 ? c.lower : c.upper) = mid;
    }
    c.parameter = 0.5 * (c.lower + c.upper);
    out.crossings.push_back(c);
  }
  return out;
}

}  // namespace cmam
