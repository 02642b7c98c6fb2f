#include "dart/rollout.hpp"

#include "dart/learner.hpp"

namespace dart {

namespace {

void check_control_space(const Environment& env, const Control& u) {
  if (env_is_continuous(env)) {
    const Vec& uv = control_vec(u);
    const auto& pm = std::get<LinearPointMassEnv>(env);
    if (uv.size() != pm.control_dim())
      throw ConfigError(
          "policy control dimension does not match the environment");
  } else {
    const int a = control_index(u);
    if (a < 0 || a >= GridWorldEnv::kNumActions)
      throw ConfigError("policy action index outside the environment's range");
  }
}

std::vector<Demonstration> collect_impl(const Environment& env,
                                        const Supervisor& sup,
                                        const ActFn& act, int n_demos, int T,
                                        const Rng& base,
                                        int first_trajectory_id) {
  if (n_demos < 1) throw ConfigError("must collect at least one rollout");
  std::vector<Demonstration> demos;
  demos.reserve(n_demos);
  for (int i = 0; i < n_demos; ++i) {
    Rng rng = base.stream(
        static_cast<uint64_t>(first_trajectory_id + i));
    Demonstration demo;
    demo.trajectory = rollout(env, act, T, rng);
    demo.labels.reserve(T);
    for (int t = 0; t < T; ++t)
      demo.labels.push_back(supervisor_act(sup, demo.trajectory.states[t]));
    demo.reward = trajectory_reward(env, demo.trajectory);
    demos.push_back(std::move(demo));
  }
  return demos;
}

}  // namespace

Trajectory rollout(const Environment& env, const ActFn& act, int T,
                   Rng& rng) {
  if (T < 1) throw ConfigError("rollout horizon must be >= 1");
  Trajectory traj;
  traj.states.reserve(T + 1);
  traj.controls.reserve(T);
  traj.states.push_back(sample_initial_state(env, rng));
  for (int t = 0; t < T; ++t) {
    Control u = act(traj.states.back(), rng);
    check_control_space(env, u);
    State next = env_step(env, traj.states.back(), u, rng);
    traj.controls.push_back(std::move(u));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

std::vector<Demonstration> collect_demonstrations(
    const Environment& env, const Supervisor& sup, const NoiseParam& psi,
    int n_demos, int T, const Rng& base, int first_trajectory_id) {
  return collect_impl(env, sup, noisy_supervisor_act_fn(sup, psi), n_demos, T,
                      base, first_trajectory_id);
}

std::vector<Demonstration> collect_labeled_rollouts(
    const Environment& env, const Supervisor& sup, const ActFn& act,
    int n_demos, int T, const Rng& base, int first_trajectory_id) {
  return collect_impl(env, sup, act, n_demos, T, base, first_trajectory_id);
}

ActFn noisy_supervisor_act_fn(const Supervisor& sup, const NoiseParam& psi) {
  return [&sup, psi](const State& x, Rng& rng) {
    return noisy_supervisor_act(sup, x, psi, rng);
  };
}

ActFn mixture_act_fn(const Supervisor& sup, const PolicyParams& policy,
                     double beta) {
  if (!(beta >= 0.0 && beta <= 1.0))
    throw ConfigError("mixture beta must lie in [0, 1]");
  return [&sup, policy, beta](const State& x, Rng& rng) {
    if (beta >= 1.0 || (beta > 0.0 && rng.uniform01() < beta))
      return supervisor_act(sup, x);
    return predict(policy, x);
  };
}

}  // namespace dart
