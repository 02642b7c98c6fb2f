#include <doctest.h>

#include <cmath>

#include "dart/learner.hpp"
#include "dart/metrics.hpp"

using namespace dart;

namespace {

GridWorldEnv tiny_grid() {
  // 2x1 world: cell 0 is the only non-goal cell, the goal sits at (1, 0).
  GridWorldEnv env;
  env.width = 2;
  env.height = 1;
  env.goal_x = 1;
  env.goal_y = 0;
  env.horizon = 1;
  return env;
}

GridWorldEnv grid3x3(double slip) {
  GridWorldEnv env;
  env.width = 3;
  env.height = 3;
  env.goal_x = 2;
  env.goal_y = 2;
  env.slip = slip;
  env.horizon = 4;
  return env;
}

TabularPolicy constant_policy(int action) {
  TabularPolicy p;
  p.default_action = action;
  return p;
}

ActionDensityFn uniform_density() {
  return [](int) {
    return std::vector<double>(GridWorldEnv::kNumActions, 0.25);
  };
}

}  // namespace

TEST_CASE("trajectory loss closed forms") {
  const LossSpec l2{LossKind::SquaredL2, std::nullopt};
  LinearPolicy a{Mat::Zero(1, 1), Vec::Constant(1, 1.0), FeatureMap{}};
  LinearPolicy b{Mat::Zero(1, 1), Vec::Zero(1), FeatureMap{}};
  Trajectory traj;
  for (int t = 0; t <= 5; ++t)
    traj.states.push_back(State(Vec(Vec::Constant(1, double(t)))));
  for (int t = 0; t < 5; ++t)
    traj.controls.push_back(Control(Vec(Vec::Zero(1))));
  CHECK(trajectory_loss(a, a, traj, l2) == 0.0);
  // Policies differing by 1 at each of 5 states with squared L2 -> 5.
  CHECK(trajectory_loss(a, b, traj, l2) == doctest::Approx(5.0));

  const LossSpec zero_one{LossKind::ZeroOne, std::nullopt};
  TabularPolicy ta = constant_policy(0);
  ta.actions = {{0, 1}, {1, 1}, {2, 0}, {3, 0}, {4, 0}};
  TabularPolicy tb = constant_policy(0);
  Trajectory dtraj;
  for (int t = 0; t <= 5; ++t) dtraj.states.push_back(State(t % 5));
  for (int t = 0; t < 5; ++t) dtraj.controls.push_back(Control(0));
  // Disagreement at 2 of the 5 visited states.
  CHECK(trajectory_loss(ta, tb, dtraj, zero_one) == doctest::Approx(2.0));
}

TEST_CASE("loss normalizer maps the per-step loss into [0, 1]") {
  const LossSpec normalized{LossKind::SquaredL2, 4.0};
  const Control big{Vec(Vec::Constant(1, 10.0))};
  const Control zero{Vec(Vec::Zero(1))};
  CHECK(normalized.step_loss(big, zero) == 1.0);  // clamped
  CHECK(normalized.step_loss(Control(Vec(Vec::Constant(1, 1.0))), zero) ==
        doctest::Approx(0.25));
  CHECK(normalized.bounded_unit());
  CHECK(!LossSpec{LossKind::SquaredL2, std::nullopt}.bounded_unit());
}

TEST_CASE("expected loss of identical policies is 0 +- 0") {
  const GridWorldEnv gw = grid3x3(0.0);
  const Supervisor sup = make_scripted_supervisor(gw);
  const PolicyParams pol = supervisor_as_policy(sup);
  const MeanStderr ms = expected_loss(
      Environment(gw), noisy_supervisor_act_fn(sup, EpsGreedyNoise{0.2}),
      pol, pol, LossSpec{LossKind::ZeroOne, std::nullopt}, 50, Rng(1));
  CHECK(ms.mean == 0.0);
  CHECK(ms.stderr_ == 0.0);
}

TEST_CASE("deterministic rollouts give zero standard error") {
  GridWorldEnv gw = grid3x3(0.0);
  gw.start = std::make_pair(0, 0);
  const Supervisor sup = make_scripted_supervisor(gw);
  TabularPolicy robot = std::get<TabularPolicy>(supervisor_as_policy(sup));
  robot.actions[gw.cell_id(0, 0)] =
      (robot.actions[gw.cell_id(0, 0)] + 1) % 4;
  const ActFn sup_act = [&sup](const State& x, Rng&) {
    return supervisor_act(sup, x);
  };
  const MeanStderr ms = expected_loss(
      Environment(gw), sup_act, robot, supervisor_as_policy(sup),
      LossSpec{LossKind::ZeroOne, std::nullopt}, 20, Rng(2));
  CHECK(ms.stderr_ == 0.0);
}

TEST_CASE("Monte Carlo expected loss matches exact enumeration") {
  const GridWorldEnv gw = grid3x3(0.1);
  const Supervisor sup = make_scripted_supervisor(gw);
  const PolicyParams sup_pol = supervisor_as_policy(sup);
  TabularPolicy robot = std::get<TabularPolicy>(sup_pol);
  robot.actions[0] = (robot.actions[0] + 1) % 4;
  robot.actions[3] = (robot.actions[3] + 2) % 4;
  const LossSpec loss{LossKind::ZeroOne, std::nullopt};
  const double eps = 0.25;
  const EnumeratedDistribution dist = enumerate_distribution(
      gw, eps_greedy_action_density(sup, eps), gw.horizon);
  const double exact = enumerated_expected_loss(dist, robot, sup_pol, loss);
  const MeanStderr mc = expected_loss(
      Environment(gw), noisy_supervisor_act_fn(sup, EpsGreedyNoise{eps}),
      robot, sup_pol, loss, 4000, Rng(3));
  CHECK(std::abs(mc.mean - exact) < 3.0 * mc.stderr_);
}

TEST_CASE("covariate shift report: perfect robot has zero shift") {
  const GridWorldEnv gw = grid3x3(0.0);
  const Supervisor sup = make_scripted_supervisor(gw);
  const ShiftReport report = covariate_shift(
      Environment(gw), sup, EpsGreedyNoise{0.1}, supervisor_as_policy(sup),
      LossSpec{LossKind::ZeroOne, std::nullopt}, 40, Rng(4));
  CHECK(report.loss_on_robot_dist == 0.0);
  CHECK(report.loss_on_collection_dist == 0.0);
  CHECK(report.shift == 0.0);
  CHECK(report.standard_loss == 0.0);
}

TEST_CASE("shift identity holds exactly") {
  const GridWorldEnv gw = grid3x3(0.05);
  const Supervisor sup = make_scripted_supervisor(gw);
  TabularPolicy robot = std::get<TabularPolicy>(supervisor_as_policy(sup));
  robot.actions[1] = (robot.actions[1] + 1) % 4;
  const ShiftReport report = covariate_shift(
      Environment(gw), sup, EpsGreedyNoise{0.15}, robot,
      LossSpec{LossKind::ZeroOne, std::nullopt}, 60, Rng(5));
  CHECK(report.shift ==
        report.loss_on_robot_dist - report.loss_on_collection_dist);
}

TEST_CASE("negative log-likelihood closed forms") {
  // eps-greedy with perfect agreement: T = 5 steps at log(0.7).
  GridWorldEnv gw = grid3x3(0.0);
  gw.horizon = 5;
  const Supervisor sup = make_scripted_supervisor(gw);
  Demonstration demo;
  for (int t = 0; t <= 5; ++t) demo.trajectory.states.push_back(State(0));
  for (int t = 0; t < 5; ++t) {
    demo.labels.push_back(supervisor_act(sup, State(0)));
    demo.trajectory.controls.push_back(demo.labels.back());
  }
  const std::vector<Demonstration> demos{demo};
  const PolicyParams agreeing = supervisor_as_policy(sup);
  CHECK(nll_objective(demos, sup, EpsGreedyNoise{0.3}, agreeing) ==
        doctest::Approx(-5.0 * std::log(0.7)));

  // Gaussian, unit covariance, zero deviations, T = 2 -> log(2 pi).
  Demonstration cdemo;
  for (int t = 0; t <= 2; ++t)
    cdemo.trajectory.states.push_back(State(Vec(Vec::Zero(1))));
  for (int t = 0; t < 2; ++t) {
    cdemo.labels.push_back(Control(Vec(Vec::Zero(1))));
    cdemo.trajectory.controls.push_back(Control(Vec(Vec::Zero(1))));
  }
  const Supervisor zero_sup = LqrSupervisor{Mat::Zero(1, 1)};
  const PolicyParams zero_robot =
      LinearPolicy{Mat::Zero(1, 1), Vec::Zero(1), FeatureMap{}};
  CHECK(nll_objective({&cdemo, 1}, zero_sup,
                      GaussianNoise{Mat::Identity(1, 1)}, zero_robot) ==
        doctest::Approx(std::log(2.0 * M_PI)));

  // A zero-density action flips the objective to +infinity.
  TabularPolicy disagreeing = std::get<TabularPolicy>(agreeing);
  disagreeing.actions[0] = (disagreeing.actions[0] + 1) % 4;
  CHECK(nll_objective(demos, sup, EpsGreedyNoise{0.0}, disagreeing) ==
        std::numeric_limits<double>::infinity());
}

TEST_CASE("enumeration: uniform policy on the almost-trivial world") {
  const GridWorldEnv env = tiny_grid();
  const EnumeratedDistribution dist =
      enumerate_distribution(env, uniform_density(), 1);
  // One initial cell, four equally likely controls.
  REQUIRE(dist.trajectories.size() == 4);
  for (const auto& traj : dist.trajectories)
    CHECK(traj.prob == doctest::Approx(0.25));
  CHECK(dist.total_mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("enumeration: deterministic policy is a single trajectory") {
  const GridWorldEnv env = tiny_grid();
  const EnumeratedDistribution dist = enumerate_distribution(
      env, delta_action_density(constant_policy(GridWorldEnv::kRight)), 1);
  REQUIRE(dist.trajectories.size() == 1);
  CHECK(dist.trajectories[0].prob == doctest::Approx(1.0));
  CHECK(dist.trajectories[0].cells.back() == env.goal_id());
}

TEST_CASE("enumeration mass sums to one with slip") {
  const GridWorldEnv env = grid3x3(0.1);
  const EnumeratedDistribution dist =
      enumerate_distribution(env, uniform_density(), 4);
  CHECK(std::abs(dist.total_mass - 1.0) <= 1e-10);
}

TEST_CASE("enumeration size guard") {
  GridWorldEnv env = grid3x3(0.0);
  CHECK_THROWS_AS(enumerate_distribution(env, uniform_density(), 12),
                  ConfigError);
}

TEST_CASE("exact KL: delta robot vs eps-greedy supervisor") {
  const GridWorldEnv env = tiny_grid();
  // The supervisor prefers right (toward the goal); eps = 0.5 leaves mass
  // 0.5 on it. A deterministic robot choosing right has KL log(1/0.5).
  const Supervisor sup = make_scripted_supervisor(env);
  REQUIRE(control_index(supervisor_act(sup, State(0))) ==
          GridWorldEnv::kRight);
  const EnumeratedDistribution robot = enumerate_distribution(
      env, delta_action_density(constant_policy(GridWorldEnv::kRight)), 1);
  const EnumeratedDistribution noisy =
      enumerate_distribution(env, eps_greedy_action_density(sup, 0.5), 1);
  const Divergence kl = exact_kl(robot, noisy);
  CHECK(!kl.infinite);
  CHECK(kl.value == doctest::Approx(std::log(2.0)));

  // Against a deterministic supervisor choosing another action: infinite.
  const EnumeratedDistribution delta_other = enumerate_distribution(
      env, delta_action_density(constant_policy(GridWorldEnv::kUp)), 1);
  CHECK(exact_kl(robot, delta_other).infinite);
  // KL(P, P) = 0.
  const Divergence self = exact_kl(robot, robot);
  CHECK(!self.infinite);
  CHECK(self.value == doctest::Approx(0.0));
}

TEST_CASE("exact TV closed forms") {
  const GridWorldEnv env = tiny_grid();
  const Supervisor sup = make_scripted_supervisor(env);
  const EnumeratedDistribution right = enumerate_distribution(
      env, delta_action_density(constant_policy(GridWorldEnv::kRight)), 1);
  const EnumeratedDistribution up = enumerate_distribution(
      env, delta_action_density(constant_policy(GridWorldEnv::kUp)), 1);
  CHECK(exact_tv(right, right) == doctest::Approx(0.0));
  CHECK(exact_tv(right, up) == doctest::Approx(1.0));  // disjoint supports
  const EnumeratedDistribution noisy =
      enumerate_distribution(env, eps_greedy_action_density(sup, 0.5), 1);
  CHECK(exact_tv(right, noisy) == doctest::Approx(0.5));
}

TEST_CASE("shift bound check on the worked example") {
  const GridWorldEnv env = tiny_grid();
  const Supervisor sup = make_scripted_supervisor(env);
  const PolicyParams robot = constant_policy(GridWorldEnv::kRight);
  const PolicyParams sup_pol = supervisor_as_policy(sup);
  const LossSpec loss{LossKind::ZeroOne, std::nullopt};
  const EnumeratedDistribution p =
      enumerate_distribution(env, delta_action_density(robot), 1);
  const EnumeratedDistribution q =
      enumerate_distribution(env, eps_greedy_action_density(sup, 0.5), 1);
  const BoundCheck same = check_shift_kl_bound(p, p, robot, sup_pol, loss, 1);
  CHECK(same.lhs == 0.0);
  CHECK(same.rhs == 0.0);
  CHECK(same.holds);
  const BoundCheck bound = check_shift_kl_bound(p, q, robot, sup_pol, loss, 1);
  CHECK(bound.rhs == doctest::Approx(std::sqrt(0.5 * std::log(2.0))));
  CHECK(bound.holds);
  // Unbounded losses are rejected.
  CHECK_THROWS_AS(check_shift_kl_bound(p, q, robot, sup_pol,
                                       LossSpec{LossKind::SquaredL2,
                                                std::nullopt},
                                       1),
                  ConfigError);
}

TEST_CASE("TV expectation bound check") {
  const std::vector<double> p{0.5, 0.5}, q{0.5, 0.5};
  const BoundCheck equal =
      check_tv_expectation_bound(p, q, {1.0, 0.0}, 1.0);
  CHECK(equal.lhs == 0.0);
  CHECK(equal.holds);
  const BoundCheck constant = check_tv_expectation_bound(
      {0.9, 0.1}, {0.1, 0.9}, {0.7, 0.7}, 1.0);
  CHECK(constant.lhs == doctest::Approx(0.0));
  CHECK(constant.holds);
  CHECK_THROWS_AS(
      check_tv_expectation_bound(p, q, {2.0, 0.0}, 1.0), ConfigError);
}

TEST_CASE("infinite KL is a flag, not an overflow") {
  const GridWorldEnv env = tiny_grid();
  const EnumeratedDistribution right = enumerate_distribution(
      env, delta_action_density(constant_policy(GridWorldEnv::kRight)), 1);
  const EnumeratedDistribution up = enumerate_distribution(
      env, delta_action_density(constant_policy(GridWorldEnv::kUp)), 1);
  const Divergence kl = exact_kl(right, up);
  CHECK(kl.infinite);
  CHECK(std::isinf(kl.value));
}
