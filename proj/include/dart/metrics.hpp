#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "dart/env.hpp"
#include "dart/rollout.hpp"
#include "dart/types.hpp"

namespace dart {

// ---------------------------------------------------------------------------
// Surrogate losses.

enum class LossKind { SquaredL2, ZeroOne };

/// Per-step control disagreement. The optional normalizer maps the raw loss
/// into [0, 1] via min(raw / normalizer, 1), as required by the KL shift
/// bound, which only holds for per-step losses in [0, 1].
struct LossSpec {
  LossKind kind = LossKind::SquaredL2;
  std::optional<double> normalizer;

  double step_loss(const Control& a, const Control& b) const;
  bool bounded_unit() const {
    return kind == LossKind::ZeroOne || normalizer.has_value();
  }
};

/// J(theta1, theta2 | xi) = sum_{t=0}^{T-1} l(pi_1(x_t), pi_2(x_t)).
/// Evaluates both policies at the visited states; the terminal state is
/// excluded.
double trajectory_loss(const PolicyParams& a, const PolicyParams& b,
                       const Trajectory& traj, const LossSpec& loss);

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
  int n = 0;
};

/// Monte-Carlo estimate of E_{p(xi|rollout_policy)} J(a, b | xi) over
/// n_rollouts independent rollouts (streams derived from `base`).
MeanStderr expected_loss(const Environment& env, const ActFn& rollout_policy,
                         const PolicyParams& a, const PolicyParams& b,
                         const LossSpec& loss, int n_rollouts,
                         const Rng& base);

/// Loss of the robot on its own trajectory distribution vs the distribution
/// the data was collected from; their difference is the covariate shift.
/// standard_loss is the loss on the noiseless supervisor distribution.
struct ShiftReport {
  double loss_on_robot_dist = 0.0;
  double loss_on_collection_dist = 0.0;
  double shift = 0.0;
  double standard_loss = 0.0;
  int n_rollouts = 0;
  double robot_stderr = 0.0;
  double collection_stderr = 0.0;
  double standard_stderr = 0.0;
};

ShiftReport covariate_shift(const Environment& env, const Supervisor& sup,
                            const NoiseParam& psi, const PolicyParams& robot,
                            const LossSpec& loss, int n_rollouts,
                            const Rng& base);

/// Shift report with an arbitrary collection policy (DAgger mixtures).
ShiftReport covariate_shift_vs(const Environment& env, const Supervisor& sup,
                               const ActFn& collection_policy,
                               const PolicyParams& robot,
                               const LossSpec& loss, int n_rollouts,
                               const Rng& base);

/// Mean over held-out trajectories of
///   -sum_t log pi*(predict(robot, x_t) | x_t, psi).
/// Returns +infinity when a zero-density action is encountered.
double nll_objective(std::span<const Demonstration> heldout,
                     const Supervisor& sup, const NoiseParam& psi,
                     const PolicyParams& robot);

// ---------------------------------------------------------------------------
// Exact trajectory enumeration for small gridworlds.

/// Per-cell action probabilities (size kNumActions, summing to 1).
using ActionDensityFn = std::function<std::vector<double>(int cell)>;

struct EnumeratedTrajectory {
  std::vector<int> cells;    // T + 1
  std::vector<int> actions;  // T
  double prob = 0.0;
};

/// Every positive-probability trajectory with its exact probability under
/// p(x0) prod_t pi(u_t|x_t) p(x_{t+1}|x_t, u_t); entries sorted by
/// (cells, actions) so two enumerations over the same environment share an
/// index space.
struct EnumeratedDistribution {
  std::vector<EnumeratedTrajectory> trajectories;
  double total_mass = 0.0;
};

/// Exact enumeration; throws ConfigError when K^T * |initial states| exceeds
/// the 1e6 size guard.
EnumeratedDistribution enumerate_distribution(const GridWorldEnv& env,
                                              const ActionDensityFn& policy,
                                              int T);

ActionDensityFn delta_action_density(const PolicyParams& policy);
ActionDensityFn eps_greedy_action_density(const Supervisor& sup, double eps);

/// KL or TV between exactly enumerated distributions. Infinite KL is a
/// distinguished flag, never a floating-point overflow.
struct Divergence {
  double value = 0.0;
  bool infinite = false;
};

Divergence exact_kl(const EnumeratedDistribution& p,
                    const EnumeratedDistribution& q);
double exact_tv(const EnumeratedDistribution& p,
                const EnumeratedDistribution& q);

/// Exact E_P J(a, b | xi) over an enumerated distribution.
double enumerated_expected_loss(const EnumeratedDistribution& p,
                                const PolicyParams& a, const PolicyParams& b,
                                const LossSpec& loss);

// ---------------------------------------------------------------------------
// Bound checks (the oracle surface).

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool rhs_infinite = false;
  bool holds = false;
};

/// Shift bound: |E_Q J - E_P J| <= T sqrt(KL(P, Q) / 2), computed exactly by
/// enumeration. Requires a per-step loss bounded in [0, 1]. An infinite KL
/// makes the bound hold trivially.
BoundCheck check_shift_kl_bound(const EnumeratedDistribution& p,
                                const EnumeratedDistribution& q,
                                const PolicyParams& robot,
                                const PolicyParams& supervisor,
                                const LossSpec& loss, int T);

/// |E_P f - E_Q f| <= B * TV(P, Q) over a shared finite support; f must map
/// into [0, B] (throws ConfigError otherwise).
BoundCheck check_tv_expectation_bound(const std::vector<double>& p,
                                      const std::vector<double>& q,
                                      const std::vector<double>& f, double B);

/// Noise keeps the KL to the robot's distribution finite: with a robot that
/// has positive error, KL(robot, noiseless supervisor) is infinite while
/// KL(robot, eps-noised supervisor) is finite for eps > 0.
struct NoiseKlReport {
  bool premise_holds = false;  // exact robot error > 0
  double robot_error = 0.0;    // E_{robot dist} J(robot, supervisor)
  Divergence kl_vs_noisy;
  Divergence kl_vs_noiseless;
  bool strict_reduction = false;
};

NoiseKlReport check_noise_kl_finiteness(const GridWorldEnv& env,
                                        const Supervisor& sup,
                                        const PolicyParams& robot, double eps,
                                        int T);

/// E_P sum_t log(pi_a(u_t|x_t) / pi_b(u_t|x_t)) computed over an enumerated
/// distribution: equals KL(P, Q) when P and Q differ only in the policy,
/// since the dynamics terms cancel.
Divergence stepwise_log_ratio_expectation(const EnumeratedDistribution& p,
                                          const ActionDensityFn& pi_a,
                                          const ActionDensityFn& pi_b);

}  // namespace dart
