// impact-hedge: batch front end for the super-replication pricing and
// verification pipelines. See README.md for config and output formats.

#include <CLI11.hpp>
#include <iostream>

#include "impact/runner.hpp"
#include "impact/version.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Super-replication pricing under linear market impact with a "
               "gamma constraint"};
  app.set_version_flag("--version", impact::kVersion);

  std::string mode;
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 1;

  app.add_option("mode", mode,
                 "facelift|price|convergence|simulate|verify|figure1|figure2|rate")
      ->required();
  app.add_option("--config", config_path, "experiment config file (INI)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory")->required();
  app.add_option("--seed", seed, "override the config seed")
      ->each([&seed_set](const std::string&) { seed_set = true; });
  app.add_option("--threads", threads,
                 "worker threads (0 = hardware; env IMPACT_HEDGE_THREADS wins)");

  CLI11_PARSE(app, argc, argv);

  try {
    impact::ExperimentConfig cfg = impact::load_config_file(config_path);
    impact::RunOverrides ov;
    ov.mode = mode;
    if (seed_set) ov.seed = seed;
    ov.threads = threads;
    return impact::run_experiment(std::move(cfg), out_dir, ov);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
