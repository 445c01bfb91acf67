#include "scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cmam::cli {
namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& msg) const {
    const int line = at.IsDefined() && at.Mark().line >= 0 ? at.Mark().line + 1 : 0;
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + msg);
  }
  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw ConfigError(source_ + ":" + std::to_string(line) + ": " + msg);
  }

  int line(const YAML::Node& n) const { return n.Mark().line + 1; }

  void only_keys(const YAML::Node& map, std::initializer_list<const char*> keys) const {
    if (!map.IsMap()) fail(map, "expected a mapping");
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; })) {
        fail(kv.first, "unknown key '" + key + "'");
      }
    }
  }

  double number(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a number");
    try {
      const double v = n.as<double>();
      if (!std::isfinite(v)) fail(n, what + " must be finite");
      return v;
    } catch (const YAML::BadConversion&) {
      fail(n, what + " must be a number, got '" + n.Scalar() + "'");
    }
  }

  long integer(const YAML::Node& n, const std::string& what, long min) const {
    if (!n.IsScalar()) fail(n, what + " must be an integer");
    long v = 0;
    try {
      v = n.as<long>();
    } catch (const YAML::BadConversion&) {
      fail(n, what + " must be an integer, got '" + n.Scalar() + "'");
    }
    if (v < min) fail(n, what + " must be at least " + std::to_string(min));
    return v;
  }

  std::string text(const YAML::Node& n, const std::string& what) const {
    if (!n.IsScalar()) fail(n, what + " must be a string");
    return n.Scalar();
  }

  bool boolean(const YAML::Node& n, const std::string& what) const {
    try {
      return n.as<bool>();
    } catch (const YAML::BadConversion&) {
      fail(n, what + " must be true or false");
    }
  }

  std::vector<double> numbers(const YAML::Node& n, const std::string& what) const {
    if (!n.IsSequence()) fail(n, what + " must be a list of numbers");
    std::vector<double> out;
    for (const auto& item : n) out.push_back(number(item, what));
    return out;
  }

 private:
  std::string source_;
};

Eigen::Vector3d triple(const Reader& r, const YAML::Node& n, const std::string& what) {
  const auto v = r.numbers(n, what);
  if (v.size() != 3) r.fail(n, what + " needs exactly 3 entries");
  return {v[0], v[1], v[2]};
}

void read_model(const Reader& r, const YAML::Node& node, Scenario& s) {
  if (!node) r.fail(1, "missing 'model' section");
  if (!node.IsMap()) r.fail(node, "'model' must be a mapping");
  const auto kind_node = node["kind"];
  if (!kind_node) r.fail(node, "model needs a 'kind' (single_rod or two_rod)");
  const std::string kind = r.text(kind_node, "model.kind");
  if (kind == "single_rod") {
    s.kind = ModelKind::SingleRod;
    r.only_keys(node, {"kind", "mu", "gamma12", "gamma13", "sigma"});
    auto& p = s.single_rod;
    if (node["mu"]) p.mu = triple(r, node["mu"], "model.mu");
    if (node["gamma12"]) p.gamma12 = r.number(node["gamma12"], "model.gamma12");
    if (node["gamma13"]) p.gamma13 = r.number(node["gamma13"], "model.gamma13");
    if (node["sigma"]) p.sigma = r.number(node["sigma"], "model.sigma");
    try {
      SingleRod check(p);
    } catch (const Error& e) {
      r.fail(node, std::string("invalid model: ") + e.what());
    }
  } else if (kind == "two_rod") {
    s.kind = ModelKind::TwoRod;
    r.only_keys(node, {"kind", "mu", "coupling", "sigma1", "sigma2"});
    auto& p = s.two_rod;
    if (node["mu"]) p.mu = triple(r, node["mu"], "model.mu");
    if (node["coupling"]) p.coupling = r.number(node["coupling"], "model.coupling");
    if (node["sigma1"]) p.sigma1 = r.number(node["sigma1"], "model.sigma1");
    if (node["sigma2"]) p.sigma2 = r.number(node["sigma2"], "model.sigma2");
    try {
      TwoRod check(p);
    } catch (const Error& e) {
      r.fail(node, std::string("invalid model: ") + e.what());
    }
  } else {
    r.fail(kind_node, "unknown model kind '" + kind + "' (expected single_rod or two_rod)");
  }
}

Waypoint read_waypoint(const Reader& r, const YAML::Node& n, const std::string& what,
                       Index dimension) {
  Waypoint w;
  w.line = r.line(n);
  if (n.IsScalar()) {
    w.label = n.Scalar();
    if (w.label->empty()) r.fail(n, what + " label is empty");
    return w;
  }
  const auto v = r.numbers(n, what);
  if (static_cast<Index>(v.size()) != dimension) {
    r.fail(n, what + " needs " + std::to_string(dimension) + " coordinates, got " +
                  std::to_string(v.size()));
  }
  w.coordinates = Eigen::Map<const Vector>(v.data(), dimension);
  return w;
}

std::vector<double> read_grid(const Reader& r, const YAML::Node& sweep) {
  const auto values = sweep["values"];
  const auto lin = sweep["linspace"];
  if (values && lin) r.fail(sweep, "give either 'values' or 'linspace', not both");
  std::vector<double> grid;
  if (values) {
    grid = r.numbers(values, "sweep.values");
  } else if (lin) {
    r.only_keys(lin, {"from", "to", "count"});
    if (!lin["from"] || !lin["to"] || !lin["count"]) {
      r.fail(lin, "linspace needs 'from', 'to' and 'count'");
    }
    const double a = r.number(lin["from"], "linspace.from");
    const double b = r.number(lin["to"], "linspace.to");
    const long count = r.integer(lin["count"], "linspace.count", 1);
    for (long i = 0; i < count; ++i) {
      grid.push_back(count == 1 ? a : a + (b - a) * static_cast<double>(i) / (count - 1));
    }
  } else {
    r.fail(sweep, "sweep needs 'values' or 'linspace'");
  }
  if (grid.empty()) r.fail(sweep, "sweep grid is empty");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) r.fail(sweep, "sweep grid must be strictly increasing");
  }
  return grid;
}

}  // namespace

std::vector<std::string> sweep_parameters(ModelKind kind) {
  if (kind == ModelKind::SingleRod) return {"gamma12", "gamma13", "sigma"};
  return {"coupling", "sigma1", "sigma2", "sigma1_squared", "sigma2_squared"};
}

Scenario with_parameter(const Scenario& s, const std::string& parameter, double value) {
  Scenario out = s;
  if (s.kind == ModelKind::SingleRod) {
    auto& p = out.single_rod;
    if (parameter == "gamma12") p.gamma12 = value;
    else if (parameter == "gamma13") p.gamma13 = value;
    else if (parameter == "sigma") p.sigma = value;
    else throw std::invalid_argument("unknown single_rod parameter " + parameter);
  } else {
    auto& p = out.two_rod;
    if (parameter == "coupling") p.coupling = value;
    else if (parameter == "sigma1") p.sigma1 = value;
    else if (parameter == "sigma2") p.sigma2 = value;
    else if (parameter == "sigma1_squared") p.sigma1 = std::sqrt(value);
    else if (parameter == "sigma2_squared") p.sigma2 = std::sqrt(value);
    else throw std::invalid_argument("unknown two_rod parameter " + parameter);
  }
  return out;
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  Reader r(source);
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    r.fail(e.mark.line + 1, e.msg);
  }
  if (!root.IsMap()) r.fail(1, "scenario must be a mapping");
  r.only_keys(root, {"name", "model", "manifold", "start", "end", "routes", "solver", "sweep",
                     "fixed_points", "seed", "workers", "output"});

  Scenario s;
  s.source = source;
  s.name = root["name"] ? r.text(root["name"], "name") : "scenario";
  read_model(r, root["model"], s);
  const Index n = s.kind == ModelKind::SingleRod ? 3 : 6;

  const std::string expected = s.kind == ModelKind::SingleRod ? "sphere" : "sphere_pair";
  if (const auto m = root["manifold"]) {
    const std::string got = r.text(m, "manifold");
    if (got != expected) r.fail(m, "manifold '" + got + "' does not match model (expected " + expected + ")");
  }

  if (!root["start"]) r.fail(1, "missing 'start'");
  if (!root["end"]) r.fail(1, "missing 'end'");
  s.start = read_waypoint(r, root["start"], "start", n);
  s.end = read_waypoint(r, root["end"], "end", n);

  const auto routes = root["routes"];
  if (!routes) r.fail(1, "missing 'routes'");
  if (!routes.IsSequence()) r.fail(routes, "'routes' must be a list");
  if (routes.size() == 0) r.fail(routes, "route list is empty");
  std::set<std::string> names;
  for (const auto& item : routes) {
    r.only_keys(item, {"name", "via"});
    RouteSpec route;
    route.line = r.line(item);
    if (!item["name"]) r.fail(item, "route needs a 'name'");
    route.name = r.text(item["name"], "route name");
    if (route.name.empty() || route.name.find_first_of("/\\") != std::string::npos) {
      r.fail(item["name"], "route name must be nonempty and free of path separators");
    }
    if (!names.insert(route.name).second) r.fail(item["name"], "duplicate route name '" + route.name + "'");
    if (const auto via = item["via"]) {
      if (!via.IsSequence()) r.fail(via, "'via' must be a list of waypoints");
      for (const auto& w : via) route.via.push_back(read_waypoint(r, w, "waypoint", n));
    }
    s.routes.push_back(std::move(route));
  }

  if (const auto solver = root["solver"]) {
    r.only_keys(solver, {"images", "gtol", "max_iterations", "reparam_stride", "memory",
                         "stagnation_window", "max_step"});
    auto& o = s.solver;
    if (solver["images"]) o.images = r.integer(solver["images"], "solver.images", 2);
    if (solver["gtol"]) o.gtol = r.number(solver["gtol"], "solver.gtol");
    if (solver["max_iterations"]) o.max_iterations = static_cast<int>(r.integer(solver["max_iterations"], "solver.max_iterations", 0));
    if (solver["reparam_stride"]) o.reparam_stride = static_cast<int>(r.integer(solver["reparam_stride"], "solver.reparam_stride", 0));
    if (solver["memory"]) o.memory = static_cast<int>(r.integer(solver["memory"], "solver.memory", 1));
    if (solver["stagnation_window"]) o.stagnation_window = static_cast<int>(r.integer(solver["stagnation_window"], "solver.stagnation_window", 1));
    if (solver["max_step"]) o.max_step = r.number(solver["max_step"], "solver.max_step");
    if (!(o.gtol > 0.0)) r.fail(solver["gtol"], "solver.gtol must be positive");
    if (!(o.max_step > 0.0)) r.fail(solver["max_step"], "solver.max_step must be positive");
  } else if (s.kind == ModelKind::TwoRod) {
    s.solver.images = 400;
  }

  if (const auto sweep = root["sweep"]) {
    r.only_keys(sweep, {"parameter", "values", "linspace", "warm_start", "refine_crossings"});
    SweepSpec spec;
    if (!sweep["parameter"]) r.fail(sweep, "sweep needs a 'parameter'");
    spec.parameter = r.text(sweep["parameter"], "sweep.parameter");
    const auto allowed = sweep_parameters(s.kind);
    if (std::find(allowed.begin(), allowed.end(), spec.parameter) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      r.fail(sweep["parameter"], "unknown sweep parameter '" + spec.parameter + "' (expected one of " + list + ")");
    }
    spec.values = read_grid(r, sweep);
    if (sweep["warm_start"]) spec.warm_start = r.boolean(sweep["warm_start"], "sweep.warm_start");
    if (sweep["refine_crossings"]) {
      spec.refine_crossings = r.boolean(sweep["refine_crossings"], "sweep.refine_crossings");
    }
    for (double v : spec.values) {
      try {
        const Scenario probe = with_parameter(s, spec.parameter, v);
        if (probe.kind == ModelKind::SingleRod) SingleRod check(probe.single_rod);
        else TwoRod check(probe.two_rod);
      } catch (const Error& e) {
        r.fail(sweep, "sweep value " + std::to_string(v) + " gives an invalid model: " + e.what());
      }
    }
    s.sweep = std::move(spec);
  }

  if (const auto fp = root["fixed_points"]) {
    r.only_keys(fp, {"random_seeds"});
    if (fp["random_seeds"]) s.random_seeds = static_cast<std::size_t>(r.integer(fp["random_seeds"], "fixed_points.random_seeds", 0));
  }
  if (root["seed"]) s.seed = static_cast<std::uint64_t>(r.integer(root["seed"], "seed", 0));
  if (root["workers"]) s.workers = static_cast<std::size_t>(r.integer(root["workers"], "workers", 1));
  if (root["output"]) s.output = r.text(root["output"], "output");
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string() + ":0: cannot open scenario file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path.string());
}

}  // namespace cmam::cli
