#include <CLI11.hpp>

#include <iostream>

#include "cmam/errors.hpp"
#include "run.hpp"

int main(int argc, char** argv) {
  using namespace cmam::cli;

  CLI::App app{"Constrained minimum action paths for rigid-rod models"};
  app.require_subcommand(1);

  Overrides o;
  long images = 0;
  double gtol = 0.0;
  std::size_t workers = 0;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string config;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("config", config, "scenario file (YAML)")->required();
    cmd->add_option("--images", images, "number of curve segments N");
    cmd->add_option("--gtol", gtol, "projected-gradient tolerance");
    cmd->add_option("--workers", workers, "worker threads");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "seed for random fixed-point seeds");
  };
  auto* solve = app.add_subcommand("solve", "minimize the action over every route");
  auto* sweep = app.add_subcommand("sweep", "scan a model parameter and locate route crossings");
  auto* fixed = app.add_subcommand("fixed-points", "locate and classify fixed points");
  for (auto* cmd : {solve, sweep, fixed}) add_common(cmd);

  CLI11_PARSE(app, argc, argv);

  auto* cmd = app.get_subcommands().front();
  if (cmd->count("--images")) o.images = images;
  if (cmd->count("--gtol")) o.gtol = gtol;
  if (cmd->count("--workers")) o.workers = workers;
  if (cmd->count("--out")) o.out = out_dir;
  if (cmd->count("--seed")) o.seed = seed;

  try {
    Scenario s = load_scenario(config);
    apply_overrides(s, o);
    if (cmd == solve) return run_solve(s, std::cerr);
    if (cmd == sweep) return run_sweep(s, std::cerr);
    return run_fixed_points(s, std::cout, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const cmam::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailed;
  }
}
