#pragma once

#include <functional>
#include <vector>

#include "dart/env.hpp"
#include "dart/rng.hpp"
#include "dart/types.hpp"

namespace dart {

/// A (possibly stochastic) state-to-control map used while rolling out.
using ActFn = std::function<Control(const State&, Rng&)>;

/// Samples x0 ~ p(x0), u_t ~ act(x_t), x_{t+1} ~ p(. | x_t, u_t) for T steps.
Trajectory rollout(const Environment& env, const ActFn& act, int T, Rng& rng);

/// N rollouts of the noise-injected supervisor. Each demonstration pairs the
/// visited states with the NOISELESS supervisor label; the executed control
/// (noise included) stays in the trajectory, and the collection reward is
/// recorded per rollout. Per-trajectory streams are derived from `base` and
/// `first_trajectory_id + i`, so collection order never matters.
std::vector<Demonstration> collect_demonstrations(
    const Environment& env, const Supervisor& sup, const NoiseParam& psi,
    int n_demos, int T, const Rng& base, int first_trajectory_id = 0);

/// Demonstrations of an arbitrary rollout policy, still labeled by the
/// supervisor at every visited state (the DAgger collection step).
std::vector<Demonstration> collect_labeled_rollouts(
    const Environment& env, const Supervisor& sup, const ActFn& act,
    int n_demos, int T, const Rng& base, int first_trajectory_id = 0);

ActFn noisy_supervisor_act_fn(const Supervisor& sup, const NoiseParam& psi);

/// Per-timestep stochastic mixture: supervisor with probability beta, the
/// given policy otherwise.
ActFn mixture_act_fn(const Supervisor& sup, const PolicyParams& policy,
                     double beta);

}  // namespace dart
