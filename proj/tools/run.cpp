#include "run.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "cmam/action.hpp"
#include "cmam/analysis.hpp"
#include "cmam/mam.hpp"
#include "cmam/manifold.hpp"
#include "cmam/models.hpp"

namespace cmam::cli {
namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void apply_overrides(Scenario& s, const Overrides& o) {
  if (o.images) {
    if (*o.images < 2) throw ConfigError("--images: need at least 2 segments");
    s.solver.images = *o.images;
  }
  if (o.gtol) {
    if (!(*o.gtol > 0.0)) throw ConfigError("--gtol: must be positive");
    s.solver.gtol = *o.gtol;
  }
  if (o.workers) s.workers = std::max<std::size_t>(1, *o.workers);
  if (o.out) s.output = *o.out;
  if (o.seed) s.seed = *o.seed;
}

namespace {

/// Calls fn(model, manifold) with the concrete types of the scenario.
template <class F>
auto with_model(const Scenario& s, F&& fn) {
  if (s.kind == ModelKind::SingleRod) return fn(SingleRod(s.single_rod), UnitSphere(3));
  return fn(TwoRod(s.two_rod), sphere_pair());
}

template <class M>
M make_model(const Scenario& s) {
  if constexpr (std::is_same_v<M, SingleRod>) {
    return SingleRod(s.single_rod);
  } else {
    return TwoRod(s.two_rod);
  }
}

constexpr std::size_t kLabelSeeds = 64;

template <Model M, ConstraintSet C>
FixedPointSearch census(const M& model, const C& manifold, std::size_t random, std::uint64_t seed) {
  return find_fixed_points(model, manifold, canonical_seeds(manifold, random, seed));
}

template <Model M, ConstraintSet C>
Vector resolve(const Scenario& s, const Waypoint& w, const FixedPointSearch& fps, const C& manifold) {
  if (!w.label) {
    if (!(w.coordinates.norm() > 0.0)) {
      throw ConfigError(s.source + ":" + std::to_string(w.line) + ": waypoint coordinates are zero");
    }
    return manifold.retract(w.coordinates);
  }
  for (const auto& p : fps.points) {
    if (p.label == *w.label) return p.location;
  }
  std::string known;
  for (const auto& p : fps.points) known += (known.empty() ? "" : " ") + p.label;
  throw ConfigError(s.source + ":" + std::to_string(w.line) + ": waypoint '" + *w.label +
                    "' does not name a fixed point of this model (known: " + known + ")");
}

template <Model M, ConstraintSet C>
std::vector<Route> build_routes(const Scenario& s, const M& model, const C& manifold) {
  const auto fps = census(model, manifold, kLabelSeeds, s.seed);
  const Vector a = resolve<M>(s, s.start, fps, manifold);
  const Vector b = resolve<M>(s, s.end, fps, manifold);
  std::vector<Route> routes;
  for (const auto& spec : s.routes) {
    Route r{spec.name, {a}};
    for (const auto& w : spec.via) r.waypoints.push_back(resolve<M>(s, w, fps, manifold));
    r.waypoints.push_back(b);
    routes.push_back(std::move(r));
  }
  return routes;
}

// Angles theta_i with x_i = (cos theta_i, sin theta_i, 0), in [0, 2 pi).
std::optional<std::vector<std::pair<double, double>>> planar_angles(const Curve& c) {
  if (c.dimension() != 6) return std::nullopt;
  std::vector<std::pair<double, double>> out;
  auto angle = [](double x, double y) {
    double t = std::atan2(y, x);
    if (t < -1e-9) t += 2.0 * M_PI;
    return std::max(t, 0.0);
  };
  for (Index i = 0; i < c.image_count(); ++i) {
    const Vector x = c.image(i);
    if (std::abs(x(2)) > 1e-6 || std::abs(x(5)) > 1e-6) return std::nullopt;
    out.emplace_back(angle(x(0), x(1)), angle(x(3), x(4)));
  }
  return out;
}

template <Model M, ConstraintSet C>
void write_path(const fs::path& file, const Curve& curve, const M& model, const C& manifold) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file);
  const Index n = curve.dimension();
  const auto angles = planar_angles(curve);
  out << "alpha";
  for (Index k = 0; k < n; ++k) out << ",x" << (k + 1);
  out << ",lambda,integrand";
  if (angles) out << ",theta1,theta2";
  out << "\n";
  for (Index i = 0; i < curve.image_count(); ++i) {
    double lambda = std::nan("");
    double integrand = std::nan("");
    try {
      lambda = time_change_lambda(curve, model, manifold, i);
      integrand = image_integrand(curve, model, manifold, i);
    } catch (const Error&) {
    }
    out << format_number(static_cast<double>(i) / static_cast<double>(curve.segment_count()));
    for (Index k = 0; k < n; ++k) out << "," << format_number(curve.points(k, i));
    out << "," << format_number(lambda) << "," << format_number(integrand);
    if (angles) {
      out << "," << format_number((*angles)[i].first) << "," << format_number((*angles)[i].second);
    }
    out << "\n";
  }
}

Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json fixed_points_json(const FixedPointSearch& fps) {
  Json points = Json::array();
  for (const auto& p : fps.points) {
    Json eig = Json::array();
    for (const auto& e : p.eigenvalues) eig.push_back({e.real(), e.imag()});
    points.push_back({{"label", p.label},
                      {"classification", to_string(p.kind)},
                      {"index", p.index},
                      {"location", vector_json(p.location)},
                      {"eigenvalues", eig}});
  }
  for (const auto& x : fps.marginal) {
    points.push_back({{"label", "marginal"}, {"classification", "marginal"}, {"location", vector_json(x)}});
  }
  return points;
}

Json model_json(const Scenario& s) {
  if (s.kind == ModelKind::SingleRod) {
    const auto& p = s.single_rod;
    return {{"kind", "single_rod"}, {"mu", {p.mu(0), p.mu(1), p.mu(2)}},
            {"gamma12", p.gamma12}, {"gamma13", p.gamma13}, {"sigma", p.sigma}};
  }
  const auto& p = s.two_rod;
  return {{"kind", "two_rod"}, {"mu", {p.mu(0), p.mu(1), p.mu(2)}}, {"coupling", p.coupling},
          {"sigma1", p.sigma1}, {"sigma2", p.sigma2}};
}

Json header_json(const Scenario& s, const char* command) {
  const auto& o = s.solver;
  return {{"scenario", s.name},
          {"command", command},
          {"model", model_json(s)},
          {"solver", {{"images", o.images}, {"gtol", o.gtol}, {"max_iterations", o.max_iterations},
                      {"reparam_stride", o.reparam_stride}}},
          {"seed", s.seed}};
}

void write_json(const fs::path& file, const Json& j) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file);
  out << j.dump(2) << "\n";
}

struct ActionRow {
  std::string sweep_value;
  std::string route;
  double action;
  bool converged;
  int iterations;
};

void write_actions(const fs::path& file, const std::vector<ActionRow>& rows) {
  fs::create_directories(file.parent_path());
  std::ofstream out(file);
  out << "sweep_value,route,action,converged,iterations\n";
  for (const auto& r : rows) {
    out << r.sweep_value << "," << r.route << "," << format_number(r.action) << ","
        << (r.converged ? "true" : "false") << "," << r.iterations << "\n";
  }
}

/// Appends action rows (and writes paths) for one multistart result.
template <Model M, ConstraintSet C>
void emit(const MultistartResult& r, const std::vector<Route>& routes, const std::string& sweep_value,
          const fs::path& path_dir, const M& model, const C& manifold, std::vector<ActionRow>& rows,
          Json& failures, std::ostream& log) {
  for (std::size_t i = 0; i < routes.size(); ++i) {
    if (!r.reports[i]) {
      rows.push_back({sweep_value, routes[i].name, std::nan(""), false, 0});
      failures.push_back({{"sweep_value", sweep_value}, {"route", routes[i].name}, {"message", r.failures[i]}});
      log << "  " << routes[i].name << ": failed: " << r.failures[i] << "\n";
      continue;
    }
    const auto& rep = *r.reports[i];
    rows.push_back({sweep_value, rep.label, rep.action, rep.converged, rep.iterations});
    write_path(path_dir / (rep.label + ".csv"), rep.curve, model, manifold);
    log << "  " << rep.label << ": action " << format_number(rep.action)
        << (rep.converged ? "" : " (not converged: " + rep.message + ")") << ", " << rep.iterations
        << " iterations\n";
  }
}

template <Model M, ConstraintSet C>
int solve_impl(const Scenario& s, const M& model, const C& manifold, std::ostream& log) {
  const auto routes = build_routes(s, model, manifold);
  const fs::path out(s.output);
  const auto result = multistart(routes, model, manifold, s.solver, s.workers);
  std::vector<ActionRow> rows;
  Json failures = Json::array();
  log << s.name << ": " << routes.size() << " routes\n";
  emit(result, routes, "", out / "paths", model, manifold, rows, failures, log);
  write_actions(out / "actions.csv", rows);

  const auto& best = *result.reports[result.global];
  Json summary = header_json(s, "solve");
  summary["global"] = Json::array({{{"sweep_value", nullptr},
                                    {"route", best.label},
                                    {"action", best.action},
                                    {"converged", best.converged}}});
  summary["crossings"] = Json::array();
  summary["failures"] = failures;
  summary["fixed_points"] = fixed_points_json(census(model, manifold, s.random_seeds, s.seed));
  write_json(out / "summary.json", summary);
  log << "global: " << best.label << " action " << format_number(best.action) << "\n";
  return kOk;
}

std::string grid_tag(std::size_t k) {
  std::ostringstream tag;
  tag << std::setw(3) << std::setfill('0') << k;
  return tag.str();
}

template <Model M, ConstraintSet C>
int sweep_impl(const Scenario& s, const M& /*base*/, const C& manifold, std::ostream& log) {
  const auto& sweep = *s.sweep;
  auto at = [&](double p) { return with_parameter(s, sweep.parameter, p); };
  auto family = [&](double p) { return make_model<M>(at(p)); };
  auto routes_at = [&](double p) { return build_routes(at(p), family(p), manifold); };

  ScanOptions options;
  options.solver = s.solver;
  options.workers = s.workers;
  options.warm_start = sweep.warm_start;
  options.refinement = sweep.refine_crossings ? 32 : 1;
  const ScanResult scan = bifurcation_scan(family, sweep.values, routes_at, manifold, options);

  const fs::path out(s.output);
  std::vector<ActionRow> rows;
  Json failures = Json::array();
  Json global = Json::array();
  for (std::size_t k = 0; k < scan.rows.size(); ++k) {
    const auto& row = scan.rows[k];
    const std::string value = format_number(row.parameter);
    log << sweep.parameter << " = " << value << "\n";
    const auto model = family(row.parameter);
    emit(row.result, routes_at(row.parameter), value, out / "paths" / grid_tag(k), model, manifold,
         rows, failures, log);
    const auto& best = *row.result.reports[row.result.global];
    global.push_back({{"sweep_value", row.parameter},
                      {"route", best.label},
                      {"action", best.action},
                      {"converged", best.converged},
                      {"paths", "paths/" + grid_tag(k)}});
  }
  write_actions(out / "actions.csv", rows);

  Json crossings = Json::array();
  for (const auto& c : scan.crossings) {
    crossings.push_back({{"parameter", c.parameter}, {"lower", c.lower}, {"upper", c.upper},
                         {"from", c.from}, {"to", c.to}});
    log << "crossing " << c.from << " -> " << c.to << " at " << sweep.parameter << " = "
        << format_number(c.parameter) << " (bracket " << format_number(c.lower) << ", "
        << format_number(c.upper) << ")\n";
  }
  Json summary = header_json(s, "sweep");
  summary["sweep"] = {{"parameter", sweep.parameter}, {"values", sweep.values},
                      {"warm_started", scan.warm_started}};
  summary["global"] = global;
  summary["crossings"] = crossings;
  summary["failures"] = failures;
  summary["aborted"] = scan.aborted;
  if (scan.aborted) summary["message"] = scan.message;
  summary["fixed_points"] = fixed_points_json(census(make_model<M>(s), manifold, s.random_seeds, s.seed));
  write_json(out / "summary.json", summary);
  if (scan.aborted) {
    log << "sweep aborted " << scan.message << "\n";
    return kRunFailed;
  }
  return kOk;
}

template <Model M, ConstraintSet C>
int fixed_points_impl(const Scenario& s, const M& model, const C& manifold, std::ostream& out,
                      std::ostream& log) {
  const auto fps = census(model, manifold, s.random_seeds, s.seed);
  const Index n = manifold.ambient_dimension();
  const Index d = manifold_dimension(manifold);

  const fs::path dir(s.output);
  fs::create_directories(dir);
  std::ofstream csv(dir / "fixed_points.csv");
  csv << "label,classification,index";
  for (Index k = 0; k < n; ++k) csv << ",x" << (k + 1);
  for (Index k = 0; k < d; ++k) csv << ",re" << (k + 1) << ",im" << (k + 1);
  csv << "\n";

  auto row = [&](const std::string& label, const std::string& kind, const std::string& index,
                 const Vector& x, const std::vector<std::complex<double>>& eig) {
    csv << label << "," << kind << "," << index;
    for (Index k = 0; k < n; ++k) csv << "," << format_number(x(k));
    for (const auto& e : eig) csv << "," << format_number(e.real()) << "," << format_number(e.imag());
    csv << "\n";

    std::ostringstream line;
    line << std::left << std::setw(12) << label << std::setw(9) << kind << std::setw(4) << index;
    line << std::right << std::fixed << std::setprecision(6);
    for (Index k = 0; k < n; ++k) line << std::setw(11) << x(k);
    line << "  |";
    for (const auto& e : eig) {
      line << " " << e.real();
      if (e.imag() != 0.0) line << (e.imag() > 0 ? "+" : "") << e.imag() << "i";
    }
    out << line.str() << "\n";
  };

  std::size_t counts[3] = {0, 0, 0};
  for (const auto& p : fps.points) {
    ++counts[static_cast<int>(p.kind)];
    row(p.label, to_string(p.kind), std::to_string(p.index), p.location, p.eigenvalues);
  }
  for (const auto& x : fps.marginal) {
    row("marginal", "marginal", "", x, tangent_eigenvalues(model, manifold, x));
  }
  const std::size_t total = fps.points.size() + fps.marginal.size();
  log << total << " fixed points: " << counts[0] << " sinks, " << counts[1] << " saddles, "
      << counts[2] << " sources, " << fps.marginal.size() << " marginal\n";
  if (s.kind == ModelKind::TwoRod && total > 36) {
    log << "note: more than 36 fixed points found (" << total << ")\n";
  }
  for (const auto& msg : fps.diagnostics) log << "skipped " << msg << "\n";

  Json summary = header_json(s, "fixed-points");
  summary["fixed_points"] = fixed_points_json(fps);
  summary["counts"] = {{"sink", counts[0]}, {"saddle", counts[1]}, {"source", counts[2]},
                       {"marginal", fps.marginal.size()}};
  write_json(dir / "summary.json", summary);
  return kOk;
}

}  // namespace

int run_solve(const Scenario& s, std::ostream& log) {
  return with_model(s, [&](const auto& model, const auto& manifold) {
    return solve_impl(s, model, manifold, log);
  });
}

int run_sweep(const Scenario& s, std::ostream& log) {
  if (!s.sweep) throw ConfigError(s.source + ":1: scenario has no 'sweep' section");
  return with_model(s, [&](const auto& model, const auto& manifold) {
    return sweep_impl(s, model, manifold, log);
  });
}

int run_fixed_points(const Scenario& s, std::ostream& out, std::ostream& log) {
  return with_model(s, [&](const auto& model, const auto& manifold) {
    return fixed_points_impl(s, model, manifold, out, log);
  });
}

}  // namespace cmam::cli
