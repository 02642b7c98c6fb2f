#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dart/algorithms.hpp"

namespace dart {

/// One experiment: an environment, its supervisor and learner, the
/// algorithms to compare and the seeds to fan out over.
struct ExperimentConfig {
  std::string experiment;
  Environment env;
  std::string supervisor_kind;  // "lqr" | "scripted"
  LearnerSpec learner;
  std::vector<AlgorithmConfig> algorithms;
  std::vector<uint64_t> seeds;
  int eval_rollouts = 100;
  std::optional<int> subsample_per_trajectory;
  std::string output_dir;  // empty: resolved from DART_OUT_ROOT or ./out
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

/// Built-in configurations: "pointmass-compare" (double integrator,
/// feature-restricted ridge learner, BC/DART/DAgger/Isotropic over 20
/// seeds) and "grid-compare" (5x5 slippery gridworld with the eps-greedy
/// noise family).
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

Supervisor make_supervisor(const ExperimentConfig& config);
LossSpec default_loss(const Environment& env);

/// Full validation with field-level messages (also called by
/// config_from_json).
void validate_config(const ExperimentConfig& config);

}  // namespace dart
