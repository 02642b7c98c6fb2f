#include <doctest.h>

#include "dart/algorithms.hpp"
#include "dart/serialize.hpp"

using namespace dart;

namespace {

LinearPointMassEnv easy_pointmass(double process_noise) {
  LinearPointMassEnv env;
  env.A = (Mat(2, 2) << 1.0, 0.1, 0.0, 1.0).finished();
  env.B = (Mat(2, 2) << 0.005, 0.0, 0.0, 0.1).finished();
  env.process_noise_std = process_noise;
  env.x0_mean = Vec::Zero(2);
  env.x0_std = Vec::Ones(2);
  env.Q = Mat::Identity(2, 2);
  env.R = Mat::Identity(2, 2);
  env.horizon = 10;
  return env;
}

RunContext pointmass_ctx(uint64_t seed, double process_noise,
                         bool restrict_features, double lambda = 1e-8) {
  RidgeSpec learner;
  learner.lambda = lambda;
  learner.use_bias = true;
  if (restrict_features) learner.features.selected = {0};
  const LinearPointMassEnv env = easy_pointmass(process_noise);
  return RunContext{Environment(env),
                    make_lqr_supervisor(env),
                    learner,
                    LossSpec{LossKind::SquaredL2, std::nullopt},
                    50,
                    std::nullopt,
                    seed};
}

GridWorldEnv demo_grid() {
  GridWorldEnv env;
  env.width = 4;
  env.height = 4;
  env.goal_x = 3;
  env.goal_y = 0;
  env.slip = 0.1;
  env.horizon = 10;
  env.start = std::make_pair(0, 3);
  return env;
}

RunContext grid_ctx(uint64_t seed) {
  const GridWorldEnv env = demo_grid();
  return RunContext{Environment(env),
                    make_scripted_supervisor(env),
                    TabularMajoritySpec{0},
                    LossSpec{LossKind::ZeroOne, std::nullopt},
                    60,
                    std::nullopt,
                    seed};
}

AlgorithmConfig base_cfg(AlgorithmKind kind, int iterations, int demos) {
  AlgorithmConfig cfg;
  cfg.kind = kind;
  cfg.name = "test";
  cfg.iterations = iterations;
  cfg.demos_per_iteration = {demos};
  return cfg;
}

std::string trace_fingerprint(const RunTrace& trace) {
  // Dataset bytes + final policy bytes capture everything data-dependent.
  return dataset_to_jsonl(trace.dataset) +
         policy_to_json(trace.final_policy).dump();
}

}  // namespace

TEST_CASE("default eval checkpoints quarter the horizon") {
  CHECK(default_eval_iterations(20) == std::vector<int>{5, 10, 15, 20});
  CHECK(default_eval_iterations(4) == std::vector<int>{1, 2, 3, 4});
  CHECK(default_eval_iterations(1) == std::vector<int>{1});
  CHECK(default_eval_iterations(2) == std::vector<int>{1, 2});
}

TEST_CASE("behavior cloning with a realizable learner recovers the expert") {
  // Full features, no process noise: the LQR supervisor is inside the
  // hypothesis class, so the final robot loses essentially nothing.
  const RunContext ctx = pointmass_ctx(3, 0.0, false, 0.0);
  const RunTrace trace =
      run_behavior_cloning(ctx, base_cfg(AlgorithmKind::BehaviorCloning, 2, 4));
  REQUIRE(trace.iterations.back().eval.has_value());
  CHECK(trace.iterations.back().eval->loss_robot <= 1e-8);
}

TEST_CASE("single demo, single step: exactly one record") {
  RunContext ctx = grid_ctx(5);
  GridWorldEnv env = demo_grid();
  env.horizon = 1;
  ctx.env = env;
  const RunTrace trace = run_behavior_cloning(
      ctx, base_cfg(AlgorithmKind::BehaviorCloning, 1, 1));
  CHECK(trace.dataset.records.size() == 1);
  CHECK(trace.iterations.size() == 1);
  CHECK(trace.iterations[0].cumulative_records == 1);
}

TEST_CASE("DART forced to zero noise is bit-identical to behavior cloning") {
  const RunContext ctx = pointmass_ctx(11, 0.01, true, 1e-6);
  AlgorithmConfig dart = base_cfg(AlgorithmKind::Dart, 3, 4);
  dart.alpha = AlphaSpec{AlphaSpec::Kind::Absolute, 0.0};  // scaled to zero
  dart.initial_noise = GaussianNoise{Mat::Zero(2, 2)};
  const RunTrace dart_trace = run_dart(ctx, dart);
  const RunTrace bc_trace =
      run_behavior_cloning(ctx, base_cfg(AlgorithmKind::BehaviorCloning, 3, 4));
  CHECK(trace_fingerprint(dart_trace) == trace_fingerprint(bc_trace));
  for (size_t k = 0; k < 3; ++k) {
    CHECK(dart_trace.iterations[k].collection_reward_mean ==
          bc_trace.iterations[k].collection_reward_mean);
    if (bc_trace.iterations[k].eval) {
      CHECK(dart_trace.iterations[k].eval->loss_robot ==
            bc_trace.iterations[k].eval->loss_robot);
    }
  }
}

TEST_CASE("isotropic with zero scale is bit-identical to behavior cloning") {
  const RunContext ctx = pointmass_ctx(13, 0.01, true, 1e-6);
  AlgorithmConfig iso = base_cfg(AlgorithmKind::Isotropic, 3, 4);
  iso.isotropic_scale = 0.0;
  const RunTrace iso_trace = run_isotropic(ctx, iso);
  const RunTrace bc_trace =
      run_behavior_cloning(ctx, base_cfg(AlgorithmKind::BehaviorCloning, 3, 4));
  CHECK(trace_fingerprint(iso_trace) == trace_fingerprint(bc_trace));
}

TEST_CASE("isotropic keeps the same covariance at every iteration") {
  const RunContext ctx = pointmass_ctx(17, 0.01, true, 1e-6);
  AlgorithmConfig iso = base_cfg(AlgorithmKind::Isotropic, 3, 3);
  iso.isotropic_scale = 0.5;
  const RunTrace trace = run_isotropic(ctx, iso);
  for (const IterationRecord& rec : trace.iterations) {
    const Mat& sigma = std::get<GaussianNoise>(rec.psi_used).sigma;
    CHECK((sigma - 0.5 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("DART with one iteration never updates the noise") {
  const RunContext ctx = pointmass_ctx(19, 0.01, true, 1e-6);
  AlgorithmConfig dart = base_cfg(AlgorithmKind::Dart, 1, 5);
  Mat init(2, 2);
  init << 0.2, 0.0, 0.0, 0.2;
  dart.initial_noise = GaussianNoise{init};
  const RunTrace trace = run_dart(ctx, dart);
  REQUIRE(trace.iterations.size() == 1);
  CHECK(!trace.iterations[0].noise_update.has_value());
  CHECK((std::get<GaussianNoise>(trace.iterations[0].psi_used).sigma - init)
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("perfect learner drives the DART noise to zero") {
  // Realizable learner on noiseless dynamics: Sigma-hat ~ 0, and the
  // trace-matching alpha shrinks psi to (numerically) nothing.
  const RunContext ctx = pointmass_ctx(23, 0.0, false, 0.0);
  AlgorithmConfig dart = base_cfg(AlgorithmKind::Dart, 3, 4);
  const RunTrace trace = run_dart(ctx, dart);
  for (size_t k = 0; k + 1 < trace.iterations.size(); ++k) {
    REQUIRE(trace.iterations[k].noise_update.has_value());
    CHECK(noise_magnitude(trace.iterations[k].noise_update->scaled) < 1e-12);
  }
}

TEST_CASE("staged demo schedule: update after the first block") {
  // Two iterations with 4 then 8 demos: one noise update, computed after
  // the first block and applied to the second.
  const RunContext ctx = pointmass_ctx(29, 0.01, true, 1e-6);
  AlgorithmConfig dart = base_cfg(AlgorithmKind::Dart, 2, 0);
  dart.demos_per_iteration = {4, 8};
  const RunTrace trace = run_dart(ctx, dart);
  REQUIRE(trace.iterations.size() == 2);
  CHECK(trace.iterations[0].cumulative_demos == 4);
  CHECK(trace.iterations[1].cumulative_demos == 12);
  CHECK(trace.iterations[0].noise_update.has_value());
  CHECK(!trace.iterations[1].noise_update.has_value());
  CHECK(is_zero_noise(trace.iterations[0].psi_used));
  CHECK(noise_magnitude(trace.iterations[1].psi_used) ==
        noise_magnitude(trace.iterations[0].noise_update->scaled));
  // Records tally with the dataset artifact.
  int iter1 = 0, iter2 = 0;
  for (const DataRecord& rec : trace.dataset.records)
    (rec.iteration == 1 ? iter1 : iter2) += 1;
  CHECK(iter1 == 4 * 10);
  CHECK(iter2 == 8 * 10);
}

TEST_CASE("multiplier alpha is frozen at the first estimate") {
  const RunContext ctx = pointmass_ctx(71, 0.01, true, 1e-6);
  AlgorithmConfig dart = base_cfg(AlgorithmKind::Dart, 4, 4);
  dart.alpha = AlphaSpec{AlphaSpec::Kind::MultiplierOfFirst, 3.0};
  const RunTrace trace = run_dart(ctx, dart);
  REQUIRE(trace.iterations[0].noise_update.has_value());
  const NoiseEstimate& first = *trace.iterations[0].noise_update;
  const double first_trace = noise_magnitude(first.raw);
  const double expected_alpha = 3.0 * 10 * first_trace;  // T = 10
  CHECK(first.alpha == doctest::Approx(expected_alpha).epsilon(1e-12));
  // Later updates reuse the frozen base even though their MLE differs.
  for (size_t k = 1; k + 1 < trace.iterations.size(); ++k) {
    REQUIRE(trace.iterations[k].noise_update.has_value());
    CHECK(trace.iterations[k].noise_update->alpha ==
          doctest::Approx(expected_alpha).epsilon(1e-12));
  }
  // And every scaled matrix simulates exactly alpha of deviation.
  for (const IterationRecord& rec : trace.iterations)
    if (rec.noise_update)
      CHECK(trace_identity_holds(
          std::get<GaussianNoise>(rec.noise_update->scaled).sigma,
          rec.noise_update->alpha, 10));
}

TEST_CASE("noise updates report a finite held-out NLL under the ridge") {
  const RunContext ctx = pointmass_ctx(73, 0.01, true, 1e-6);
  const RunTrace trace = run_dart(ctx, base_cfg(AlgorithmKind::Dart, 3, 4));
  for (const IterationRecord& rec : trace.iterations)
    if (rec.noise_update) CHECK(std::isfinite(rec.noise_update->heldout_nll));
}

TEST_CASE("DAgger with beta = 1 collects pure supervisor data") {
  const RunContext ctx = grid_ctx(31);
  AlgorithmConfig dagger = base_cfg(AlgorithmKind::DAgger, 2, 3);
  dagger.dagger_beta = 1.0;
  const RunTrace trace = run_dagger(ctx, dagger);
  for (const DataRecord& rec : trace.dataset.records)
    CHECK(control_equal(rec.label, rec.executed));
  // With the same seed, behavior cloning collects the same trajectories.
  const RunTrace bc = run_behavior_cloning(
      ctx, base_cfg(AlgorithmKind::BehaviorCloning, 2, 3));
  CHECK(dataset_to_jsonl(trace.dataset) == dataset_to_jsonl(bc.dataset));
}

TEST_CASE("DAgger trace marks mixture collection and grows the data") {
  const RunContext ctx = grid_ctx(37);
  AlgorithmConfig dagger = base_cfg(AlgorithmKind::DAgger, 4, 3);
  const RunTrace trace = run_dagger(ctx, dagger);
  REQUIRE(trace.iterations.size() == 4);
  int prev = 0;
  for (const IterationRecord& rec : trace.iterations) {
    CHECK(rec.mixture_collection);
    CHECK(rec.cumulative_records > prev);
    prev = rec.cumulative_records;
  }
  CHECK(trace.iterations.back().cumulative_demos == 12);
}

TEST_CASE("DAgger-B retrains only on scheduled iterations") {
  const RunContext ctx = grid_ctx(41);
  AlgorithmConfig dagger = base_cfg(AlgorithmKind::DAgger, 4, 3);
  dagger.retrain_iterations = std::vector<int>{2, 4};
  const RunTrace trace = run_dagger(ctx, dagger);
  CHECK(trace.iterations.size() == 4);
  // Still produces a final policy trained on everything.
  CHECK(std::holds_alternative<TabularPolicy>(trace.final_policy));
}

TEST_CASE("reruns with the same seed reproduce the trace exactly") {
  const RunContext ctx = pointmass_ctx(43, 0.01, true, 1e-6);
  AlgorithmConfig dart = base_cfg(AlgorithmKind::Dart, 3, 4);
  const RunTrace a = run_dart(ctx, dart);
  const RunTrace b = run_dart(ctx, dart);
  CHECK(trace_fingerprint(a) == trace_fingerprint(b));
  REQUIRE(a.iterations.size() == b.iterations.size());
  for (size_t k = 0; k < a.iterations.size(); ++k)
    CHECK(a.iterations[k].collection_reward_mean ==
          b.iterations[k].collection_reward_mean);
}

TEST_CASE("training sets grow strictly across iterations") {
  for (AlgorithmKind kind :
       {AlgorithmKind::BehaviorCloning, AlgorithmKind::Dart,
        AlgorithmKind::Isotropic}) {
    const RunContext ctx = pointmass_ctx(47, 0.01, true, 1e-6);
    const RunTrace trace = run_algorithm(ctx, base_cfg(kind, 3, 2));
    int prev = 0;
    for (const IterationRecord& rec : trace.iterations) {
      CHECK(rec.cumulative_records > prev);
      prev = rec.cumulative_records;
    }
  }
}

TEST_CASE("per-trajectory subsampling thins the training view only") {
  RunContext ctx = pointmass_ctx(53, 0.01, true, 1e-6);
  ctx.subsample_per_trajectory = 4;  // of horizon 10
  const RunTrace trace = run_behavior_cloning(
      ctx, base_cfg(AlgorithmKind::BehaviorCloning, 2, 3));
  CHECK(trace.iterations.back().cumulative_records == 2 * 3 * 4);
  // The dataset artifact still holds the full trajectories.
  CHECK(trace.dataset.records.size() == 2u * 3u * 10u);
}

TEST_CASE("discrete DART turns exploration on from held-out disagreement") {
  const RunContext ctx = grid_ctx(59);
  AlgorithmConfig dart = base_cfg(AlgorithmKind::Dart, 5, 4);
  const RunTrace trace = run_dart(ctx, dart);
  double max_eps = 0.0;
  for (const IterationRecord& rec : trace.iterations)
    max_eps = std::max(max_eps, noise_magnitude(rec.psi_used));
  CHECK(max_eps > 0.0);
  // And the noise estimates stay within the valid eps range.
  for (const IterationRecord& rec : trace.iterations)
    if (rec.noise_update) {
      const double eps =
          std::get<EpsGreedyNoise>(rec.noise_update->scaled).eps;
      CHECK(eps >= 0.0);
      CHECK(eps < 1.0);
    }
}

TEST_CASE("algorithm and environment noise families must agree") {
  const RunContext ctx = grid_ctx(61);
  AlgorithmConfig dart = base_cfg(AlgorithmKind::Dart, 2, 2);
  dart.initial_noise = GaussianNoise{Mat::Identity(4, 4)};
  CHECK_THROWS_AS(run_dart(ctx, dart), ConfigError);
  AlgorithmConfig iso = base_cfg(AlgorithmKind::Isotropic, 2, 2);
  CHECK_THROWS_AS(run_isotropic(ctx, iso), ConfigError);
}

TEST_CASE("wishart runs reduce to behavior cloning at zero target trace") {
  const RunContext ctx = pointmass_ctx(67, 0.01, true, 1e-6);
  AlgorithmConfig wishart = base_cfg(AlgorithmKind::Wishart, 2, 3);
  wishart.wishart_target_trace = 0.0;
  const RunTrace w = run_algorithm(ctx, wishart);
  const RunTrace bc = run_behavior_cloning(
      ctx, base_cfg(AlgorithmKind::BehaviorCloning, 2, 3));
  CHECK(trace_fingerprint(w) == trace_fingerprint(bc));

  wishart.wishart_target_trace = 0.4;
  const RunTrace noisy = run_algorithm(ctx, wishart);
  for (const IterationRecord& rec : noisy.iterations)
    CHECK(noise_magnitude(rec.psi_used) == doctest::Approx(0.4));
}
