#pragma once

#include <optional>
#include <string>

#include "impact/config.hpp"

namespace impact {

struct RunOverrides {
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

// Executes one experiment: validates the config, runs the requested mode and
// writes the mode's CSV artifacts plus manifest.txt into out_dir. Returns 0
// on success; failures surface as exceptions with field-level context.
int run_experiment(ExperimentConfig cfg, const std::string& out_dir,
                   const RunOverrides& overrides = {});

}  // namespace impact
