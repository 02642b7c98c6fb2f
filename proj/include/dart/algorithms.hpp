#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dart/env.hpp"
#include "dart/learner.hpp"
#include "dart/metrics.hpp"
#include "dart/noise.hpp"
#include "dart/types.hpp"

namespace dart {

enum class AlgorithmKind {
  BehaviorCloning,  // noiseless supervisor demos, single final fit
  Dart,             // noise-injected supervisor, MLE + shrinkage updates
  DAgger,           // per-timestep supervisor/robot mixture, full retrains
  Isotropic,        // fixed scale * I Gaussian noise, no updates
  Wishart,          // fixed random covariance scaled to a target trace
};

/// How the anticipated final error alpha is chosen for the shrinkage step.
struct AlphaSpec {
  enum class Kind {
    TraceOfEstimate,    // alpha = T tr(Sigma-hat) each update: no rescaling
    Absolute,           // alpha = value
    MultiplierOfFirst,  // alpha = value * T tr(Sigma-hat_1), frozen at the
                        // first update
  };
  Kind kind = Kind::TraceOfEstimate;
  double value = 0.0;
};

struct AlgorithmConfig {
  AlgorithmKind kind = AlgorithmKind::BehaviorCloning;
  std::string name;                     // CSV label; defaults to the kind
  int iterations = 1;                   // K
  std::vector<int> demos_per_iteration; // size K, or size 1 to broadcast
  AlphaSpec alpha;
  std::optional<NoiseParam> initial_noise;  // DART psi_1; default zero noise
  double dagger_beta = 0.5;
  double isotropic_scale = 1.0;
  std::optional<double> wishart_target_trace;
  std::optional<std::vector<int>> retrain_iterations;  // DAgger-B schedule
  std::vector<int> eval_iterations;  // empty: {K/4, K/2, 3K/4, K}
};

struct EvalRecord {
  double loss_robot = 0.0;
  double loss_robot_stderr = 0.0;
  double loss_collection = 0.0;
  double loss_collection_stderr = 0.0;
  double loss_supervisor = 0.0;
  double loss_supervisor_stderr = 0.0;
  double shift = 0.0;
  double reward_eval = 0.0;
  double reward_eval_stderr = 0.0;
  double training_loss = 0.0;
};

struct IterationRecord {
  int iteration = 0;  // 1-based
  NoiseParam psi_used;
  bool mixture_collection = false;  // DAgger
  int cumulative_demos = 0;
  int cumulative_records = 0;  // training records (after any subsampling)
  double collection_reward_mean = 0.0;
  std::optional<NoiseEstimate> noise_update;  // update computed after this
                                              // iteration (DART only)
  std::optional<EvalRecord> eval;
};

struct RunTrace {
  std::vector<IterationRecord> iterations;  // exactly K records
  PolicyParams final_policy;
  Dataset dataset;  // full records, pre-subsampling
  double supervisor_reward_mean = 0.0;
};

struct RunContext {
  Environment env;
  Supervisor sup;
  LearnerSpec learner;
  LossSpec loss;
  int eval_rollouts = 100;
  std::optional<int> subsample_per_trajectory;  // without replacement
  uint64_t seed = 0;
};

std::vector<int> default_eval_iterations(int iterations);

/// Runs one training loop to completion. All randomness derives from
/// ctx.seed through purpose-keyed streams, so a rerun reproduces the trace
/// exactly and algorithms that collect identically (e.g. Behavior Cloning
/// and DART forced to zero noise) produce bit-identical datasets and
/// policies.
RunTrace run_algorithm(const RunContext& ctx, const AlgorithmConfig& cfg);

RunTrace run_behavior_cloning(const RunContext& ctx,
                              const AlgorithmConfig& cfg);
RunTrace run_dart(const RunContext& ctx, const AlgorithmConfig& cfg);
RunTrace run_dagger(const RunContext& ctx, const AlgorithmConfig& cfg);
RunTrace run_isotropic(const RunContext& ctx, const AlgorithmConfig& cfg);

}  // namespace dart
