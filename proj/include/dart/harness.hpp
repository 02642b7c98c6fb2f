#pragma once

#include <string>
#include <vector>

#include "dart/config.hpp"

namespace dart {

struct RunOptions {
  std::string out_dir_override;
  std::vector<uint64_t> seed_override;
  int jobs = 1;
  bool write_artifacts = true;
};

struct MetricRow {
  std::string algorithm;
  uint64_t seed = 0;
  int iteration = 0;
  std::string metric;
  double value = 0.0;
};

struct ExperimentResult {
  std::string experiment;
  std::string output_dir;
  std::vector<MetricRow> rows;
  std::string results_csv;  // exact bytes written to results.csv
};

/// Output directory resolution: --out-dir flag, then the config's
/// output_dir, then $DART_OUT_ROOT/<experiment>, then ./out/<experiment>.
std::string resolve_output_dir(const ExperimentConfig& config,
                               const RunOptions& options);

/// One long-format metric row per (algorithm, seed, iteration, metric).
/// Iteration 0 carries the supervisor reward baseline.
std::vector<MetricRow> trace_to_rows(const AlgorithmConfig& cfg,
                                     uint64_t seed, const RunTrace& trace);

std::string rows_to_csv(const std::string& experiment,
                        const std::vector<MetricRow>& rows);

/// Runs every (algorithm, seed) pair, writes results.csv plus per-run
/// dataset/policy artifacts and a config echo, and returns the rows.
/// Deterministic: identical config, identical bytes, regardless of jobs.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const RunOptions& options = {});

// ---------------------------------------------------------------------------
// Plot-ready curve data.

struct CurvePoint {
  std::string algorithm;
  int iteration = 0;
  double n_demos = 0.0;
  double mean = 0.0;
  double stderr_ = 0.0;
  int n_seeds = 0;
};

/// Per-algorithm (n_demos, mean over seeds, stderr) of one metric. Throws
/// ConfigError listing the available metrics when the name is unknown.
std::vector<CurvePoint> compute_curves(const std::string& results_csv,
                                       const std::string& metric);
std::string curves_to_csv(const std::vector<CurvePoint>& points);

// ---------------------------------------------------------------------------
// Oracle suite: numerical verification of the estimators and bounds.

struct OracleCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
  std::string detail;
};

struct OracleReport {
  std::vector<OracleCheck> checks;
  bool all_pass = true;
};

/// Closed-form covariance MLE beats (or matches within tol) the best of a
/// dense numerical search over Cholesky-parameterized candidates.
OracleCheck check_gaussian_mle_closed_form(int n_sets, double tol,
                                           uint64_t seed);

/// Disagreement-rate estimate matches the grid-search argmin of the
/// negative log-likelihood within the grid resolution.
OracleCheck check_eps_mle_grid(int n_sets, double grid_step, uint64_t seed);

/// T tr(scaled) = alpha and the normalized matrix is unchanged.
OracleCheck check_shrink_trace_identity(int n_cases, double rtol,
                                        uint64_t seed);

/// Monte-Carlo squared deviation of noisy rollouts matches T tr(Sigma).
OracleCheck check_gaussian_deviation_mc(int n_sigmas, int n_rollouts,
                                        double rtol, uint64_t seed);

/// |E_Q J - E_P J| <= T sqrt(KL/2) over random policy pairs on a 3x3 grid,
/// horizon 4, 0-1 loss, by exact enumeration.
OracleCheck check_shift_bound_sweep(int n_pairs, uint64_t seed);

/// |E_P f - E_Q f| <= B TV(P, Q) over random triples on 10-point supports.
OracleCheck check_tv_bound_sweep(int n_triples, uint64_t seed);

/// Noise keeps KL finite: disagreeing robot vs eps-noised supervisor is
/// finite while vs the noiseless supervisor it is infinite; agreeing robot
/// reports a violated premise; eps = 0 yields no strict reduction.
OracleCheck check_noise_kl_cases(uint64_t seed);

/// Gibbs (KL >= 0, zero iff equal) and Pinsker (TV <= sqrt(KL/2)) on random
/// enumerated pairs.
OracleCheck check_kl_properties(int n_pairs, uint64_t seed);

/// Monte-Carlo expected loss lands within 3 standard errors of the exact
/// enumeration value in >= 99 of 100 repetitions.
OracleCheck check_mc_vs_enumeration(int n_reps, uint64_t seed);

/// KL computed trajectory-wise equals the expectation of the per-step
/// policy log-ratios (dynamics terms cancel).
OracleCheck check_kl_stepwise_decomposition(int n_pairs, uint64_t seed);

OracleReport run_oracle_suite(uint64_t seed = 20250801);
std::string oracle_report_to_text(const OracleReport& report);

// ---------------------------------------------------------------------------
// Wishart ablation: random covariance directions at low / matched / high
// target traces, compared against DART and Behavior Cloning.

struct AblationResult {
  ExperimentResult result;
  double dart_mean_shift = 0.0;
  double dart_shift_sd = 0.0;
  double matched_mean_shift = 0.0;
  double bc_mean_collection_reward = 0.0;
  double high_mean_collection_reward = 0.0;
  bool matched_within_band = false;
  bool high_reward_below_bc = false;
};

AblationResult wishart_ablation(const ExperimentConfig& config,
                                const RunOptions& options = {});

}  // namespace dart
