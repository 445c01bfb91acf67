#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "scenario.hpp"

namespace cmam::cli {

/// Command-line values that take precedence over the scenario file.
struct Overrides {
  std::optional<long> images;
  std::optional<double> gtol;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
};

void apply_overrides(Scenario& s, const Overrides& o);

enum ExitCode : int { kOk = 0, kConfigError = 2, kRunFailed = 3 };

/// Multistart over the scenario's routes at its base parameters.
int run_solve(const Scenario& s, std::ostream& log);
/// Bifurcation scan over the scenario's sweep grid.
int run_sweep(const Scenario& s, std::ostream& log);
/// Fixed-point census with canonical seeds, printed and written to fixed_points.csv.
int run_fixed_points(const Scenario& s, std::ostream& out, std::ostream& log);

/// %.17g, the format of every number written to CSV.
std::string format_number(double v);

}  // namespace cmam::cli
