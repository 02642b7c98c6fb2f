#include "dart/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dart/learner.hpp"

namespace dart {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MeanStderr summarize(const std::vector<double>& values) {
  MeanStderr out;
  out.n = static_cast<int>(values.size());
  if (out.n == 0) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / out.n;
  if (out.n > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stderr_ = std::sqrt(ss / (out.n - 1) / out.n);
  }
  return out;
}

/// Transition probabilities of the gridworld kernel, matching env_step: the
/// goal is absorbing; otherwise slip replaces the action by a uniform one
/// before the clamped move.
std::vector<std::pair<int, double>> grid_transition(const GridWorldEnv& env,
                                                    int cell, int action) {
  std::vector<std::pair<int, double>> out;
  if (cell == env.goal_id()) {
    out.emplace_back(cell, 1.0);
    return out;
  }
  auto add = [&out](int next, double p) {
    for (auto& [c, q] : out) {
      if (c == next) {
        q += p;
        return;
      }
    }
    out.emplace_back(next, p);
  };
  const double slip_each = env.slip / GridWorldEnv::kNumActions;
  for (int a = 0; a < GridWorldEnv::kNumActions; ++a) {
    double p = slip_each;
    if (a == action) p += 1.0 - env.slip;
    if (p > 0.0) add(env.move(cell, a), p);
  }
  return out;
}

bool traj_key_less(const EnumeratedTrajectory& a,
                   const EnumeratedTrajectory& b) {
  if (a.cells != b.cells) return a.cells < b.cells;
  return a.actions < b.actions;
}

bool traj_key_equal(const EnumeratedTrajectory& a,
                    const EnumeratedTrajectory& b) {
  return a.cells == b.cells && a.actions == b.actions;
}

}  // namespace

double LossSpec::step_loss(const Control& a, const Control& b) const {
  double raw;
  if (kind == LossKind::SquaredL2) {
    const Vec& va = control_vec(a);
    const Vec& vb = control_vec(b);
    raw = (va - vb).squaredNorm();
  } else {
    raw = control_index(a) == control_index(b) ? 0.0 : 1.0;
  }
  if (normalizer) raw = std::min(raw / *normalizer, 1.0);
  return raw;
}

double trajectory_loss(const PolicyParams& a, const PolicyParams& b,
                       const Trajectory& traj, const LossSpec& loss) {
  double total = 0.0;
  for (int t = 0; t < traj.horizon(); ++t) {
    const State& x = traj.states[t];
    total += loss.step_loss(predict(a, x), predict(b, x));
  }
  return total;
}

MeanStderr expected_loss(const Environment& env, const ActFn& rollout_policy,
                         const PolicyParams& a, const PolicyParams& b,
                         const LossSpec& loss, int n_rollouts,
                         const Rng& base) {
  if (n_rollouts < 1) throw ConfigError("n_rollouts must be >= 1");
  const int T = env_horizon(env);
  std::vector<double> values;
  values.reserve(n_rollouts);
  for (int i = 0; i < n_rollouts; ++i) {
    Rng rng = base.stream(static_cast<uint64_t>(i));
    const Trajectory traj = rollout(env, rollout_policy, T, rng);
    values.push_back(trajectory_loss(a, b, traj, loss));
  }
  return summarize(values);
}

ShiftReport covariate_shift(const Environment& env, const Supervisor& sup,
                            const NoiseParam& psi, const PolicyParams& robot,
                            const LossSpec& loss, int n_rollouts,
                            const Rng& base) {
  return covariate_shift_vs(env, sup, noisy_supervisor_act_fn(sup, psi),
                            robot, loss, n_rollouts, base);
}

ShiftReport covariate_shift_vs(const Environment& env, const Supervisor& sup,
                               const ActFn& collection_policy,
                               const PolicyParams& robot,
                               const LossSpec& loss, int n_rollouts,
                               const Rng& base) {
  const PolicyParams sup_policy = supervisor_as_policy(sup);
  const ActFn robot_act = [&robot](const State& x, Rng&) {
    return predict(robot, x);
  };
  const ActFn sup_act = [&sup](const State& x, Rng&) {
    return supervisor_act(sup, x);
  };
  const MeanStderr on_robot = expected_loss(
      env, robot_act, robot, sup_policy, loss, n_rollouts, base.stream(1));
  const MeanStderr on_collection =
      expected_loss(env, collection_policy, robot, sup_policy, loss,
                    n_rollouts, base.stream(2));
  const MeanStderr on_supervisor = expected_loss(
      env, sup_act, robot, sup_policy, loss, n_rollouts, base.stream(3));
  ShiftReport report;
  report.loss_on_robot_dist = on_robot.mean;
  report.loss_on_collection_dist = on_collection.mean;
  report.shift = on_robot.mean - on_collection.mean;
  report.standard_loss = on_supervisor.mean;
  report.n_rollouts = n_rollouts;
  report.robot_stderr = on_robot.stderr_;
  report.collection_stderr = on_collection.stderr_;
  report.standard_stderr = on_supervisor.stderr_;
  return report;
}

double nll_objective(std::span<const Demonstration> heldout,
                     const Supervisor& sup, const NoiseParam& psi,
                     const PolicyParams& robot) {
  if (heldout.empty()) throw DataError("nll_objective needs demonstrations");
  double total = 0.0;
  for (const Demonstration& demo : heldout) {
    for (int t = 0; t < demo.trajectory.horizon(); ++t) {
      const State& x = demo.trajectory.states[t];
      const double logp = action_log_density(sup, x, predict(robot, x), psi);
      if (logp == -kInf) return kInf;
      total -= logp;
    }
  }
  return total / static_cast<double>(heldout.size());
}

EnumeratedDistribution enumerate_distribution(const GridWorldEnv& env,
                                              const ActionDensityFn& policy,
                                              int T) {
  const int n_init = env.start ? 1 : env.num_cells() - 1;
  const double guard =
      std::pow(static_cast<double>(GridWorldEnv::kNumActions), T) * n_init;
  if (guard > 1e6)
    throw ConfigError("enumeration size guard exceeded (K^T * |x0| > 1e6)");

  EnumeratedDistribution dist;
  struct Frontier {
    std::vector<int> cells;
    std::vector<int> actions;
    double prob;
  };
  std::vector<Frontier> frontier;
  if (env.start) {
    frontier.push_back(
        Frontier{{env.cell_id(env.start->first, env.start->second)}, {}, 1.0});
  } else {
    const double init_prob = 1.0 / n_init;
    for (int cell = 0; cell < env.num_cells(); ++cell) {
      if (cell == env.goal_id()) continue;  // initial states exclude the goal
      frontier.push_back(Frontier{{cell}, {}, init_prob});
    }
  }
  for (int t = 0; t < T; ++t) {
    std::vector<Frontier> next;
    for (const Frontier& f : frontier) {
      const int cell = f.cells.back();
      const std::vector<double> action_probs = policy(cell);
      if (static_cast<int>(action_probs.size()) != GridWorldEnv::kNumActions)
        throw ConfigError("action density must cover all grid actions");
      for (int a = 0; a < GridWorldEnv::kNumActions; ++a) {
        if (action_probs[a] <= 0.0) continue;
        for (const auto& [dest, p] : grid_transition(env, cell, a)) {
          Frontier g = f;
          g.actions.push_back(a);
          g.cells.push_back(dest);
          g.prob *= action_probs[a] * p;
          next.push_back(std::move(g));
        }
      }
    }
    frontier = std::move(next);
  }
  dist.trajectories.reserve(frontier.size());
  for (Frontier& f : frontier)
    dist.trajectories.push_back(EnumeratedTrajectory{
        std::move(f.cells), std::move(f.actions), f.prob});
  std::sort(dist.trajectories.begin(), dist.trajectories.end(),
            traj_key_less);
  // Merge duplicates produced by distinct slip outcomes landing on the same
  // cell sequence (they are already merged per step, so this is a no-op
  // unless the policy produced repeated branches).
  std::vector<EnumeratedTrajectory> merged;
  for (EnumeratedTrajectory& traj : dist.trajectories) {
    if (!merged.empty() && traj_key_equal(merged.back(), traj))
      merged.back().prob += traj.prob;
    else
      merged.push_back(std::move(traj));
  }
  dist.trajectories = std::move(merged);
  double mass = 0.0;
  for (const EnumeratedTrajectory& traj : dist.trajectories)
    mass += traj.prob;
  dist.total_mass = mass;
  if (std::abs(mass - 1.0) > 1e-10)
    throw SolverError("enumerated trajectory probabilities do not sum to 1");
  return dist;
}

ActionDensityFn delta_action_density(const PolicyParams& policy) {
  return [policy](int cell) {
    std::vector<double> probs(GridWorldEnv::kNumActions, 0.0);
    probs[control_index(predict(policy, cell))] = 1.0;
    return probs;
  };
}

ActionDensityFn eps_greedy_action_density(const Supervisor& sup, double eps) {
  return [&sup, eps](int cell) {
    std::vector<double> probs(GridWorldEnv::kNumActions,
                              eps / (GridWorldEnv::kNumActions - 1));
    probs[control_index(supervisor_act(sup, cell))] = 1.0 - eps;
    return probs;
  };
}

Divergence exact_kl(const EnumeratedDistribution& p,
                    const EnumeratedDistribution& q) {
  Divergence out;
  size_t i = 0, j = 0;
  double kl = 0.0;
  while (i < p.trajectories.size()) {
    const EnumeratedTrajectory& tp = p.trajectories[i];
    // Advance q to the matching key.
    while (j < q.trajectories.size() &&
           traj_key_less(q.trajectories[j], tp))
      ++j;
    const bool match = j < q.trajectories.size() &&
                       traj_key_equal(q.trajectories[j], tp);
    if (tp.prob > 0.0) {
      if (!match || q.trajectories[j].prob <= 0.0) {
        out.infinite = true;
        out.value = kInf;
        return out;
      }
      kl += tp.prob * std::log(tp.prob / q.trajectories[j].prob);
    }
    ++i;
  }
  out.value = kl;
  return out;
}

double exact_tv(const EnumeratedDistribution& p,
                const EnumeratedDistribution& q) {
  double l1 = 0.0;
  size_t i = 0, j = 0;
  while (i < p.trajectories.size() || j < q.trajectories.size()) {
    if (j >= q.trajectories.size()) {
      l1 += std::abs(p.trajectories[i++].prob);
    } else if (i >= p.trajectories.size()) {
      l1 += std::abs(q.trajectories[j++].prob);
    } else if (traj_key_less(p.trajectories[i], q.trajectories[j])) {
      l1 += std::abs(p.trajectories[i++].prob);
    } else if (traj_key_less(q.trajectories[j], p.trajectories[i])) {
      l1 += std::abs(q.trajectories[j++].prob);
    } else {
      l1 += std::abs(p.trajectories[i].prob - q.trajectories[j].prob);
      ++i;
      ++j;
    }
  }
  return 0.5 * l1;
}

double enumerated_expected_loss(const EnumeratedDistribution& p,
                                const PolicyParams& a, const PolicyParams& b,
                                const LossSpec& loss) {
  double total = 0.0;
  for (const EnumeratedTrajectory& traj : p.trajectories) {
    double j_val = 0.0;
    for (size_t t = 0; t + 1 < traj.cells.size(); ++t) {
      const State x = traj.cells[t];
      j_val += loss.step_loss(predict(a, x), predict(b, x));
    }
    total += traj.prob * j_val;
  }
  return total;
}

BoundCheck check_shift_kl_bound(const EnumeratedDistribution& p,
                                const EnumeratedDistribution& q,
                                const PolicyParams& robot,
                                const PolicyParams& supervisor,
                                const LossSpec& loss, int T) {
  if (!loss.bounded_unit())
    throw ConfigError(
        "the shift bound requires a per-step loss bounded in [0, 1]");
  BoundCheck out;
  const double ep = enumerated_expected_loss(p, robot, supervisor, loss);
  const double eq = enumerated_expected_loss(q, robot, supervisor, loss);
  out.lhs = std::abs(eq - ep);
  const Divergence kl = exact_kl(p, q);
  if (kl.infinite) {
    out.rhs_infinite = true;
    out.rhs = kInf;
    out.holds = true;
    return out;
  }
  out.rhs = T * std::sqrt(0.5 * kl.value);
  out.holds = out.lhs <= out.rhs + 1e-10;
  return out;
}

BoundCheck check_tv_expectation_bound(const std::vector<double>& p,
                                      const std::vector<double>& q,
                                      const std::vector<double>& f,
                                      double B) {
  if (p.size() != q.size() || p.size() != f.size())
    throw ConfigError("p, q and f must share a support");
  for (double v : f)
    if (v < 0.0 || v > B)
      throw ConfigError("f must map into [0, B]");
  double ep = 0.0, eq = 0.0, l1 = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    ep += p[i] * f[i];
    eq += q[i] * f[i];
    l1 += std::abs(p[i] - q[i]);
  }
  BoundCheck out;
  out.lhs = std::abs(ep - eq);
  out.rhs = B * 0.5 * l1;
  out.holds = out.lhs <= out.rhs + 1e-10;
  return out;
}

NoiseKlReport check_noise_kl_finiteness(const GridWorldEnv& env,
                                        const Supervisor& sup,
                                        const PolicyParams& robot, double eps,
                                        int T) {
  NoiseKlReport report;
  const EnumeratedDistribution robot_dist =
      enumerate_distribution(env, delta_action_density(robot), T);
  const LossSpec zero_one{LossKind::ZeroOne, std::nullopt};
  report.robot_error = enumerated_expected_loss(
      robot_dist, robot, supervisor_as_policy(sup), zero_one);
  report.premise_holds = report.robot_error > 0.0;
  const EnumeratedDistribution noisy =
      enumerate_distribution(env, eps_greedy_action_density(sup, eps), T);
  const EnumeratedDistribution noiseless =
      enumerate_distribution(env, eps_greedy_action_density(sup, 0.0), T);
  report.kl_vs_noisy = exact_kl(robot_dist, noisy);
  report.kl_vs_noiseless = exact_kl(robot_dist, noiseless);
  report.strict_reduction =
      report.premise_holds && !report.kl_vs_noisy.infinite &&
      report.kl_vs_noiseless.infinite;
  return report;
}

Divergence stepwise_log_ratio_expectation(const EnumeratedDistribution& p,
                                          const ActionDensityFn& pi_a,
                                          const ActionDensityFn& pi_b) {
  Divergence out;
  double total = 0.0;
  for (const EnumeratedTrajectory& traj : p.trajectories) {
    if (traj.prob <= 0.0) continue;
    double log_ratio = 0.0;
    for (size_t t = 0; t < traj.actions.size(); ++t) {
      const double pa = pi_a(traj.cells[t])[traj.actions[t]];
      const double pb = pi_b(traj.cells[t])[traj.actions[t]];
      if (pb <= 0.0) {
        out.infinite = true;
        out.value = kInf;
        return out;
      }
      if (pa <= 0.0)
        throw ConfigError(
            "pi_a must assign positive probability to actions on P's "
            "support");
      log_ratio += std::log(pa / pb);
    }
    total += traj.prob * log_ratio;
  }
  out.value = total;
  return out;
}

}  // namespace dart
