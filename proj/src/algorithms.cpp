#include "dart/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dart/rollout.hpp"

namespace dart {

namespace {

NoiseParam env_zero_noise(const Environment& env) {
  if (env_is_continuous(env)) {
    const int du = env_control_dim(env);
    return GaussianNoise{Mat::Zero(du, du)};
  }
  return EpsGreedyNoise{0.0};
}

void check_noise_family(const Environment& env, const NoiseParam& psi) {
  const bool gaussian = std::holds_alternative<GaussianNoise>(psi);
  if (gaussian != env_is_continuous(env))
    throw ConfigError(
        "noise family does not match the environment's control space");
  if (gaussian) {
    const auto& g = std::get<GaussianNoise>(psi);
    if (g.sigma.rows() != env_control_dim(env))
      throw ConfigError("noise covariance dimension does not match d_u");
  }
}

std::vector<int> resolve_demo_counts(const AlgorithmConfig& cfg) {
  if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");
  std::vector<int> counts = cfg.demos_per_iteration;
  if (counts.empty()) throw ConfigError("demos_per_iteration must be set");
  if (counts.size() == 1)
    counts.assign(static_cast<size_t>(cfg.iterations), counts.front());
  if (static_cast<int>(counts.size()) != cfg.iterations)
    throw ConfigError(
        "demos_per_iteration must have one entry or one per iteration");
  for (int n : counts)
    if (n < 1) throw ConfigError("demos per iteration must be >= 1");
  return counts;
}

/// Training records of one demonstration, optionally subsampled without
/// replacement. The dataset artifact always keeps the full trajectory; only
/// the learner sees the subsample.
std::vector<DataRecord> training_records(const Demonstration& demo,
                                         int iteration, int trajectory_id,
                                         std::optional<int> subsample,
                                         const Rng& master) {
  const int T = demo.trajectory.horizon();
  std::vector<int> steps(T);
  std::iota(steps.begin(), steps.end(), 0);
  if (subsample && *subsample < T) {
    Rng rng = master.stream(stream_tag::kSubsample,
                            static_cast<uint64_t>(trajectory_id));
    // Partial Fisher-Yates, then sort to keep records in time order.
    for (int i = 0; i < *subsample; ++i) {
      const int j =
          i + static_cast<int>(rng.uniform_below(static_cast<uint64_t>(T - i)));
      std::swap(steps[i], steps[j]);
    }
    steps.resize(*subsample);
    std::sort(steps.begin(), steps.end());
  }
  std::vector<DataRecord> records;
  records.reserve(steps.size());
  for (int t : steps)
    records.push_back(DataRecord{iteration, trajectory_id, t,
                                 demo.trajectory.states[t], demo.labels[t],
                                 demo.trajectory.controls[t]});
  return records;
}

double mean_reward(const std::vector<Demonstration>& demos) {
  double total = 0.0;
  for (const Demonstration& d : demos) total += d.reward;
  return demos.empty() ? 0.0 : total / static_cast<double>(demos.size());
}

double training_loss(const PolicyParams& policy,
                     const std::vector<DataRecord>& records,
                     const LossSpec& loss) {
  if (records.empty()) return 0.0;
  double total = 0.0;
  for (const DataRecord& rec : records)
    total += loss.step_loss(predict(policy, rec.state), rec.label);
  return total / static_cast<double>(records.size());
}

struct Engine {
  const RunContext& ctx;
  const AlgorithmConfig& cfg;
  Rng master;
  int horizon;
  std::vector<int> demo_counts;
  std::vector<int> eval_iterations;

  Dataset dataset;
  std::vector<std::vector<Demonstration>> demos_by_iter;     // full demos
  std::vector<std::vector<DataRecord>> records_by_iter;      // training view
  std::vector<DataRecord> all_records;
  int next_trajectory_id = 0;

  Engine(const RunContext& ctx_in, const AlgorithmConfig& cfg_in)
      : ctx(ctx_in), cfg(cfg_in), master(ctx_in.seed) {
    validate_env(ctx.env);
    horizon = env_horizon(ctx.env);
    demo_counts = resolve_demo_counts(cfg);
    eval_iterations = cfg.eval_iterations.empty()
                          ? default_eval_iterations(cfg.iterations)
                          : cfg.eval_iterations;
    for (int k : eval_iterations)
      if (k < 1 || k > cfg.iterations)
        throw ConfigError("eval iteration outside 1..K");
    dataset.meta.env_id = env_id(ctx.env);
    dataset.meta.horizon = horizon;
    dataset.meta.master_seed = ctx.seed;
  }

  bool is_eval_iteration(int k) const {
    return std::find(eval_iterations.begin(), eval_iterations.end(), k) !=
           eval_iterations.end();
  }

  /// Ingests one iteration's demos into the dataset and the training view.
  void ingest(int iteration, std::vector<Demonstration> demos) {
    std::vector<DataRecord> records;
    for (size_t i = 0; i < demos.size(); ++i) {
      auto recs =
          training_records(demos[i], iteration, next_trajectory_id + int(i),
                           ctx.subsample_per_trajectory, master);
      records.insert(records.end(), recs.begin(), recs.end());
    }
    append_demonstrations(dataset, demos, iteration, next_trajectory_id);
    next_trajectory_id += static_cast<int>(demos.size());
    all_records.insert(all_records.end(), records.begin(), records.end());
    demos_by_iter.push_back(std::move(demos));
    records_by_iter.push_back(std::move(records));
  }

  PolicyParams fit_all() const { return fit(ctx.learner, all_records); }

  double supervisor_baseline() {
    const ActFn sup_act = [this](const State& x, Rng&) {
      return supervisor_act(ctx.sup, x);
    };
    double total = 0.0;
    const Rng base = master.stream(stream_tag::kBaseline);
    for (int i = 0; i < ctx.eval_rollouts; ++i) {
      Rng rng = base.stream(static_cast<uint64_t>(i));
      total += trajectory_reward(ctx.env,
                                 rollout(ctx.env, sup_act, horizon, rng));
    }
    return total / std::max(1, ctx.eval_rollouts);
  }

  EvalRecord evaluate(int iteration, const PolicyParams& policy,
                      const ActFn& collection_policy) {
    const Rng base =
        master.stream(stream_tag::kEval, static_cast<uint64_t>(iteration));
    const ShiftReport shift =
        covariate_shift_vs(ctx.env, ctx.sup, collection_policy, policy,
                           ctx.loss, ctx.eval_rollouts, base);
    EvalRecord eval;
    eval.loss_robot = shift.loss_on_robot_dist;
    eval.loss_robot_stderr = shift.robot_stderr;
    eval.loss_collection = shift.loss_on_collection_dist;
    eval.loss_collection_stderr = shift.collection_stderr;
    eval.loss_supervisor = shift.standard_loss;
    eval.loss_supervisor_stderr = shift.standard_stderr;
    eval.shift = shift.shift;
    // Reward of the current policy, executed deterministically.
    const ActFn policy_act = [&policy](const State& x, Rng&) {
      return predict(policy, x);
    };
    const Rng reward_base = base.stream(4);
    std::vector<double> rewards;
    rewards.reserve(ctx.eval_rollouts);
    for (int i = 0; i < ctx.eval_rollouts; ++i) {
      Rng rng = reward_base.stream(static_cast<uint64_t>(i));
      rewards.push_back(trajectory_reward(
          ctx.env, rollout(ctx.env, policy_act, horizon, rng)));
    }
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= std::max<size_t>(1, rewards.size());
    double ss = 0.0;
    for (double r : rewards) ss += (r - mean) * (r - mean);
    eval.reward_eval = mean;
    eval.reward_eval_stderr =
        rewards.size() > 1
            ? std::sqrt(ss / (rewards.size() - 1) / rewards.size())
            : 0.0;
    eval.training_loss = training_loss(policy, all_records, ctx.loss);
    return eval;
  }
};

/// The DART noise update entering iteration k+1. The demonstrations of
/// iteration k are the held-out set; the policy is fit on the data of
/// iterations 1..k-1 and never sees them. At k = 1 no prior data exists, so
/// the iteration's demos are split in half (fit on the first half, estimate
/// on the second); with a single demo the same demo serves both roles.
NoiseEstimate dart_noise_update(Engine& engine, int k,
                                std::optional<double>& first_alpha_base) {
  const auto& heldout_demos = engine.demos_by_iter[static_cast<size_t>(k - 1)];
  std::span<const Demonstration> heldout(heldout_demos);
  PolicyParams policy;
  if (k == 1) {
    const int n = static_cast<int>(heldout_demos.size());
    if (n >= 2) {
      const int split = (n + 1) / 2;
      std::vector<DataRecord> fit_records;
      for (const DataRecord& rec :
           engine.records_by_iter[0])
        if (rec.trajectory_id < split) fit_records.push_back(rec);
      policy = fit(engine.ctx.learner, fit_records);
      heldout = heldout.subspan(static_cast<size_t>(split));
    } else {
      policy = fit(engine.ctx.learner, engine.records_by_iter[0]);
    }
  } else {
    std::vector<DataRecord> prior;
    for (int i = 0; i + 1 < k; ++i)
      prior.insert(prior.end(), engine.records_by_iter[size_t(i)].begin(),
                   engine.records_by_iter[size_t(i)].end());
    policy = fit(engine.ctx.learner, prior);
  }

  const int T = engine.horizon;
  NoiseEstimate est;
  est.heldout_demos = static_cast<int>(heldout.size());
  if (env_is_continuous(engine.ctx.env)) {
    const Mat sigma_hat = mle_gaussian(heldout, policy);
    double alpha;
    switch (engine.cfg.alpha.kind) {
      case AlphaSpec::Kind::TraceOfEstimate:
        alpha = expected_gaussian_deviation(sigma_hat, T);
        break;
      case AlphaSpec::Kind::Absolute:
        alpha = engine.cfg.alpha.value;
        break;
      case AlphaSpec::Kind::MultiplierOfFirst:
        if (!first_alpha_base)
          first_alpha_base = expected_gaussian_deviation(sigma_hat, T);
        alpha = engine.cfg.alpha.value * *first_alpha_base;
        break;
      default:
        throw ConfigError("unknown alpha kind");
    }
    const GaussianShrink shrink = shrink_gaussian(sigma_hat, alpha, T);
    est.raw = GaussianNoise{sigma_hat};
    est.scaled = GaussianNoise{shrink.sigma};
    est.alpha = alpha;
    est.beta = shrink.beta;
    est.isotropic_fallback = shrink.isotropic_fallback;
  } else {
    const int K = env_control_dim(engine.ctx.env);
    const double eps_hat = mle_epsilon(heldout, policy, K);
    double alpha;
    switch (engine.cfg.alpha.kind) {
      case AlphaSpec::Kind::TraceOfEstimate:
        alpha = T * eps_hat;
        break;
      case AlphaSpec::Kind::Absolute:
        alpha = engine.cfg.alpha.value;
        break;
      case AlphaSpec::Kind::MultiplierOfFirst:
        if (!first_alpha_base) first_alpha_base = T * eps_hat;
        alpha = engine.cfg.alpha.value * *first_alpha_base;
        break;
      default:
        throw ConfigError("unknown alpha kind");
    }
    const double eps_scaled = shrink_epsilon(eps_hat, alpha, T, K);
    est.raw = EpsGreedyNoise{eps_hat};
    est.scaled = EpsGreedyNoise{eps_scaled};
    est.alpha = alpha;
    est.beta = eps_hat > 0.0 ? eps_scaled / eps_hat : 0.0;
    est.isotropic_fallback = false;
  }
  // Divergence proxy: NLL of the robot's controls on the held-out set under
  // the scaled noise. Densities always get a 1e-8 ridge (single-iteration
  // estimates are routinely rank-deficient).
  NoiseParam density_psi = est.scaled;
  if (auto* g = std::get_if<GaussianNoise>(&density_psi))
    g->sigma = regularize_covariance(g->sigma, 1e-8);
  est.heldout_nll =
      nll_objective(heldout, engine.ctx.sup, density_psi, policy);
  return est;
}

/// Shared loop for the noise-injection family: Behavior Cloning (noise
/// pinned to zero), DART (MLE + shrinkage updates), Isotropic and Wishart
/// (fixed noise). They consume identical random streams, which is what makes
/// the zero-noise degeneracies bit-identical to Behavior Cloning.
RunTrace run_noise_injection_loop(const RunContext& ctx,
                                  const AlgorithmConfig& cfg) {
  Engine engine(ctx, cfg);
  RunTrace trace;
  trace.supervisor_reward_mean = engine.supervisor_baseline();

  NoiseParam psi = env_zero_noise(ctx.env);
  switch (cfg.kind) {
    case AlgorithmKind::BehaviorCloning:
      break;
    case AlgorithmKind::Dart:
      if (cfg.initial_noise) psi = validate_noise(*cfg.initial_noise);
      break;
    case AlgorithmKind::Isotropic: {
      if (!env_is_continuous(ctx.env))
        throw ConfigError("isotropic noise requires a continuous environment");
      const int du = env_control_dim(ctx.env);
      psi = GaussianNoise{cfg.isotropic_scale * Mat::Identity(du, du)};
      break;
    }
    case AlgorithmKind::Wishart: {
      if (!env_is_continuous(ctx.env))
        throw ConfigError("Wishart noise requires a continuous environment");
      const double target = cfg.wishart_target_trace.value_or(0.0);
      if (target > 0.0) {
        Rng rng = engine.master.stream(stream_tag::kWishart);
        psi = GaussianNoise{wishart_random_covariance(
            env_control_dim(ctx.env), target, rng)};
      }
      break;
    }
    default:
      throw ConfigError("run_noise_injection_loop cannot run DAgger");
  }
  check_noise_family(ctx.env, psi);

  std::optional<double> first_alpha_base;
  const Rng demo_base = engine.master.stream(stream_tag::kDemo);
  for (int k = 1; k <= cfg.iterations; ++k) {
    psi = validate_noise(psi);
    dataset_note_noise(engine.dataset, psi);
    auto demos = collect_demonstrations(
        ctx.env, ctx.sup, psi, engine.demo_counts[size_t(k - 1)],
        engine.horizon, demo_base, engine.next_trajectory_id);
    const double reward = mean_reward(demos);
    engine.ingest(k, std::move(demos));

    IterationRecord record;
    record.iteration = k;
    record.psi_used = psi;
    record.cumulative_demos = engine.next_trajectory_id;
    record.cumulative_records = static_cast<int>(engine.all_records.size());
    record.collection_reward_mean = reward;

    if (cfg.kind == AlgorithmKind::Dart && k < cfg.iterations) {
      NoiseEstimate est = dart_noise_update(engine, k, first_alpha_base);
      psi = est.scaled;
      record.noise_update = std::move(est);
    }

    if (engine.is_eval_iteration(k)) {
      const PolicyParams policy = engine.fit_all();
      record.eval = engine.evaluate(
          k, policy, noisy_supervisor_act_fn(ctx.sup, record.psi_used));
    }
    trace.iterations.push_back(std::move(record));
  }
  trace.final_policy = engine.fit_all();
  trace.dataset = std::move(engine.dataset);
  return trace;
}

RunTrace run_dagger_loop(const RunContext& ctx, const AlgorithmConfig& cfg) {
  if (!(cfg.dagger_beta >= 0.0 && cfg.dagger_beta <= 1.0))
    throw ConfigError("dagger_beta must lie in [0, 1]");
  Engine engine(ctx, cfg);
  RunTrace trace;
  trace.supervisor_reward_mean = engine.supervisor_baseline();

  const auto retrain_at = [&cfg](int k) {
    if (!cfg.retrain_iterations) return true;  // full DAgger retrains always
    return std::find(cfg.retrain_iterations->begin(),
                     cfg.retrain_iterations->end(),
                     k) != cfg.retrain_iterations->end();
  };

  const Rng demo_base = engine.master.stream(stream_tag::kDemo);
  const NoiseParam zero = env_zero_noise(ctx.env);
  std::optional<PolicyParams> policy;
  for (int k = 1; k <= cfg.iterations; ++k) {
    dataset_note_noise(engine.dataset, zero);
    std::vector<Demonstration> demos;
    const int n = engine.demo_counts[size_t(k - 1)];
    // The distribution this iteration's data actually came from, kept for
    // the checkpoint shift report (the retrain below changes the mixture).
    std::optional<ActFn> collection_act;
    if (k == 1) {
      // One initial supervisor demonstration bootstraps the first policy;
      // the rest of the iteration already rolls out the mixture.
      auto boot = collect_demonstrations(ctx.env, ctx.sup, zero, 1,
                                         engine.horizon, demo_base,
                                         engine.next_trajectory_id);
      demos.insert(demos.end(), boot.begin(), boot.end());
      if (n > 1) {
        std::vector<DataRecord> boot_records =
            training_records(boot.front(), 1, engine.next_trajectory_id,
                             ctx.subsample_per_trajectory, engine.master);
        policy = fit(ctx.learner, boot_records);
        collection_act = mixture_act_fn(ctx.sup, *policy, cfg.dagger_beta);
        auto rest = collect_labeled_rollouts(
            ctx.env, ctx.sup, *collection_act, n - 1, engine.horizon,
            demo_base, engine.next_trajectory_id + 1);
        demos.insert(demos.end(), rest.begin(), rest.end());
      }
    } else {
      collection_act = mixture_act_fn(ctx.sup, *policy, cfg.dagger_beta);
      demos = collect_labeled_rollouts(ctx.env, ctx.sup, *collection_act, n,
                                       engine.horizon, demo_base,
                                       engine.next_trajectory_id);
    }
    if (!collection_act) {  // pure supervisor bootstrap iteration
      collection_act = [&sup = ctx.sup](const State& x, Rng&) {
        return supervisor_act(sup, x);
      };
    }
    const double reward = mean_reward(demos);
    engine.ingest(k, std::move(demos));

    if (retrain_at(k) || !policy) policy = engine.fit_all();

    IterationRecord record;
    record.iteration = k;
    record.psi_used = zero;
    record.mixture_collection = true;
    record.cumulative_demos = engine.next_trajectory_id;
    record.cumulative_records = static_cast<int>(engine.all_records.size());
    record.collection_reward_mean = reward;
    if (engine.is_eval_iteration(k))
      record.eval = engine.evaluate(k, *policy, *collection_act);
    trace.iterations.push_back(std::move(record));
  }
  trace.final_policy = engine.fit_all();
  trace.dataset = std::move(engine.dataset);
  return trace;
}

}  // namespace

std::vector<int> default_eval_iterations(int iterations) {
  std::vector<int> out;
  for (int quarter = 1; quarter <= 4; ++quarter) {
    const int k = std::max(
        1, static_cast<int>(std::lround(iterations * quarter / 4.0)));
    if (out.empty() || out.back() != k) out.push_back(k);
  }
  return out;
}

RunTrace run_algorithm(const RunContext& ctx, const AlgorithmConfig& cfg) {
  if (cfg.kind == AlgorithmKind::DAgger) return run_dagger_loop(ctx, cfg);
  return run_noise_injection_loop(ctx, cfg);
}

RunTrace run_behavior_cloning(const RunContext& ctx,
                              const AlgorithmConfig& cfg) {
  if (cfg.kind != AlgorithmKind::BehaviorCloning)
    throw ConfigError("config kind must be BehaviorCloning");
  return run_algorithm(ctx, cfg);
}

RunTrace run_dart(const RunContext& ctx, const AlgorithmConfig& cfg) {
  if (cfg.kind != AlgorithmKind::Dart)
    throw ConfigError("config kind must be Dart");
  return run_algorithm(ctx, cfg);
}

RunTrace run_dagger(const RunContext& ctx, const AlgorithmConfig& cfg) {
  if (cfg.kind != AlgorithmKind::DAgger)
    throw ConfigError("config kind must be DAgger");
  return run_algorithm(ctx, cfg);
}

RunTrace run_isotropic(const RunContext& ctx, const AlgorithmConfig& cfg) {
  if (cfg.kind != AlgorithmKind::Isotropic)
    throw ConfigError("config kind must be Isotropic");
  return run_algorithm(ctx, cfg);
}

}  // namespace dart
