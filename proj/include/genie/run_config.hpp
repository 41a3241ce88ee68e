#pragma once

#include <string>

#include "genie/model.hpp"

namespace genie {

/// One experiment: model hyperparameters plus dataset manifest and output
/// directory. The task normally comes from the dataset; a config that states
/// it explicitly must agree.
struct RunConfig {
  ModelConfig model;
  bool task_explicit = false;
  std::string dataset;
  std::string out_dir = "run";
};

/// Parses a JSON config. Every key is optional; unknown keys are rejected.
/// Keys: variant, depth, hidden, residual, bias, task, lr, l2_penalty,
/// epochs, patience, seed, dataset, out_dir.
RunConfig load_run_config(const std::string& path);

/// Applies one "key=value" override using the same keys as the JSON file.
void apply_override(RunConfig& cfg, const std::string& assignment);

/// Resolved snapshot of the config, suitable for re-running the experiment.
std::string run_config_json(const RunConfig& cfg);

}  // namespace genie
