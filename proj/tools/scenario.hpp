#pragma once

// Scenario files: one YAML document describing a model, endpoints, routes,
// solver options and an optional parameter sweep.
//
//   name: rod_shear12
//   model: {kind: single_rod, mu: [1, 2, 3], gamma12: 0.0}
//   manifold: sphere
//   start: si+
//   end: si-
//   routes:
//     - {name: via_sa-, via: [sa-]}
//     - {name: via_so, via: [[0, 0.1, 1]]}
//   solver: {images: 200, gtol: 1.0e-8}
//   sweep: {parameter: gamma12, linspace: {from: -1, to: 1, count: 21}}
//   output: out/rod_shear12

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmam/mam.hpp"
#include "cmam/models.hpp"

namespace cmam::cli {

/// Invalid scenario; what() carries "<source>:<line>: <message>".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind { SingleRod, TwoRod };

/// Either a fixed-point label ("sa-", "si2", "(+e1,-e3)") or coordinates.
struct Waypoint {
  std::optional<std::string> label;
  Vector coordinates;
  int line = 0;
};

struct RouteSpec {
  std::string name;
  std::vector<Waypoint> via;
  int line = 0;
};

struct SweepSpec {
  std::string parameter;
  std::vector<double> values;
  bool warm_start = true;
  bool refine_crossings = true;  // bisect each crossing down to step / 32
};

struct Scenario {
  std::string name;
  std::string source;
  ModelKind kind = ModelKind::SingleRod;
  SingleRod::Params single_rod;
  TwoRod::Params two_rod;
  Waypoint start;
  Waypoint end;
  std::vector<RouteSpec> routes;
  SolverOptions solver;
  std::optional<SweepSpec> sweep;
  std::size_t random_seeds = 0;  // extra random seeds for the fixed-point search
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::string output = "out";
};

Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");
Scenario load_scenario(const std::filesystem::path& path);

/// Names accepted by `sweep.parameter` for a model kind.
std::vector<std::string> sweep_parameters(ModelKind kind);

/// Copy of the scenario with one model parameter set (sweep application).
Scenario with_parameter(const Scenario& s, const std::string& parameter, double value);

}  // namespace cmam::cli
