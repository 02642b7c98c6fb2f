#include <doctest.h>

#include <cmath>

#include <Eigen/Eigenvalues>

#include "dart/learner.hpp"
#include "dart/metrics.hpp"
#include "dart/noise.hpp"

using namespace dart;

namespace {

/// Held-out set with prescribed deviation vectors: states are unused by the
/// bookkeeping, the robot policy is a constant offset from the labels.
std::vector<Demonstration> demos_with_deviations(
    const std::vector<std::vector<Vec>>& deviations) {
  // Encode deviation d_t at step t by state x_t = d_t with labels 0; the
  // "robot" is the identity map so predict(x) - label = d_t.
  std::vector<Demonstration> demos;
  for (const auto& traj : deviations) {
    Demonstration demo;
    const int d = static_cast<int>(traj.front().size());
    for (const Vec& dev : traj) {
      demo.trajectory.states.push_back(State(dev));
      demo.labels.push_back(Control(Vec(Vec::Zero(d))));
      demo.trajectory.controls.push_back(Control(Vec(Vec::Zero(d))));
    }
    demo.trajectory.states.push_back(State(Vec(Vec::Zero(d))));
    demos.push_back(std::move(demo));
  }
  return demos;
}

PolicyParams identity_robot(int d) {
  return LinearPolicy{Mat::Identity(d, d), Vec::Zero(d), FeatureMap{}};
}

std::vector<Demonstration> discrete_demos(const std::vector<int>& states,
                                          const std::vector<int>& labels,
                                          int per_traj) {
  std::vector<Demonstration> demos;
  for (size_t i = 0; i < states.size(); i += per_traj) {
    Demonstration demo;
    for (int t = 0; t < per_traj; ++t) {
      demo.trajectory.states.push_back(State(states[i + t]));
      demo.labels.push_back(Control(labels[i + t]));
      demo.trajectory.controls.push_back(Control(labels[i + t]));
    }
    demo.trajectory.states.push_back(State(0));
    demos.push_back(std::move(demo));
  }
  return demos;
}

}  // namespace

TEST_CASE("covariance MLE closed form on a hand-computed instance") {
  Vec d0(2), d1(2);
  d0 << 1.0, 0.0;
  d1 << 0.0, 2.0;
  const auto demos = demos_with_deviations({{d0, d1}});
  const Mat sigma = mle_gaussian(demos, identity_robot(2));
  CHECK(sigma(0, 0) == doctest::Approx(0.5));
  CHECK(sigma(1, 1) == doctest::Approx(2.0));
  CHECK(sigma(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("perfect robot gives the zero covariance") {
  const auto demos =
      demos_with_deviations({{Vec(Vec::Zero(2)), Vec(Vec::Zero(2))}});
  const Mat sigma = mle_gaussian(demos, identity_robot(2));
  CHECK(sigma.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(mle_gaussian({}, identity_robot(2)), DataError);
}

TEST_CASE("closed form matches a coordinate-descent NLL oracle") {
  // Random 2-D instance; the oracle minimizes the negative log-likelihood
  // over (s11, s22, s12) by cyclic golden-section line searches.
  Rng rng(41);
  std::vector<std::vector<Vec>> devs;
  for (int m = 0; m < 3; ++m) {
    std::vector<Vec> traj;
    for (int t = 0; t < 8; ++t) {
      Vec d(2);
      d[0] = 0.8 * rng.normal();
      d[1] = -0.3 * d[0] + 0.5 * rng.normal();
      traj.push_back(d);
    }
    devs.push_back(traj);
  }
  const auto demos = demos_with_deviations(devs);
  const PolicyParams robot = identity_robot(2);
  const Mat sigma_hat = mle_gaussian(demos, robot);

  Mat scatter = Mat::Zero(2, 2);
  int n = 0;
  for (const auto& traj : devs)
    for (const Vec& d : traj) {
      scatter += d * d.transpose();
      ++n;
    }
  auto nll = [&](double s11, double s22, double s12) {
    const double det = s11 * s22 - s12 * s12;
    // Sloped penalty outside the PD cone keeps the line searches unimodal.
    if (s11 <= 1e-8 || det <= 1e-10)
      return 1e6 * (1.0 + std::max(0.0, -det) + std::max(0.0, -s11));
    Mat inv(2, 2);
    inv << s22, -s12, -s12, s11;
    inv /= det;
    return 0.5 * (n * (2.0 * std::log(2.0 * M_PI) + std::log(det)) +
                  (inv * scatter).trace());
  };
  double s11 = 1.0, s22 = 1.0, s12 = 0.0;
  auto line_min = [&](int coord) {
    double lo = coord == 2 ? -3.0 : 1e-4, hi = 3.0;
    for (int it = 0; it < 90; ++it) {
      const double m1 = lo + 0.382 * (hi - lo);
      const double m2 = lo + 0.618 * (hi - lo);
      auto value = [&](double v) {
        return coord == 0 ? nll(v, s22, s12)
               : coord == 1 ? nll(s11, v, s12)
                            : nll(s11, s22, v);
      };
      (value(m1) < value(m2) ? hi : lo) = (value(m1) < value(m2) ? m2 : m1);
    }
    const double best = 0.5 * (lo + hi);
    (coord == 0 ? s11 : coord == 1 ? s22 : s12) = best;
  };
  for (int sweep = 0; sweep < 200; ++sweep)
    for (int coord = 0; coord < 3; ++coord) line_min(coord);

  CHECK(sigma_hat(0, 0) == doctest::Approx(s11).epsilon(1e-5));
  CHECK(sigma_hat(1, 1) == doctest::Approx(s22).epsilon(1e-5));
  CHECK(sigma_hat(0, 1) == doctest::Approx(s12).epsilon(1e-4));
  CHECK(nll(sigma_hat(0, 0), sigma_hat(1, 1), sigma_hat(0, 1)) <=
        nll(s11, s22, s12) + 1e-5);
}

TEST_CASE("eps MLE is the mean disagreement rate") {
  // Two trajectories, T = 5, disagreements {1, 3} -> eps-hat = 0.4. The
  // robot always answers action 0; labels disagree where they are 1.
  TabularPolicy robot;
  robot.default_action = 0;
  const auto demos = discrete_demos({0, 1, 2, 3, 4, 5, 6, 7, 8, 9},
                                    {0, 1, 0, 0, 0, 1, 1, 0, 1, 0}, 5);
  CHECK(mle_epsilon(demos, robot, 4) == doctest::Approx(0.4));

  const auto agree = discrete_demos({0, 1, 2}, {0, 0, 0}, 3);
  CHECK(mle_epsilon(agree, robot, 4) == 0.0);
  CHECK_THROWS_AS(mle_epsilon({}, robot, 4), DataError);
}

TEST_CASE("eps MLE matches a fine grid search of the NLL") {
  Rng rng(17);
  for (int instance = 0; instance < 10; ++instance) {
    Rng r = rng.stream(static_cast<uint64_t>(instance));
    const int T = 6;
    const int n_traj = 2 + static_cast<int>(r.uniform_below(3));
    std::vector<int> states, labels, sup_table(8);
    TabularPolicy robot;
    for (int s = 0; s < 8; ++s) {
      sup_table[s] = static_cast<int>(r.uniform_below(4));
      robot.actions[s] = static_cast<int>(r.uniform_below(4));
    }
    for (int i = 0; i < n_traj * T; ++i) {
      const int s = static_cast<int>(r.uniform_below(8));
      states.push_back(s);
      labels.push_back(sup_table[s]);
    }
    const auto demos = discrete_demos(states, labels, T);
    const double eps_hat = mle_epsilon(demos, robot, 4);

    const Supervisor sup = ScriptedGridSupervisor{sup_table, 8, 1};
    double best_eps = 0.0, best = 1e300;
    for (double eps = 0.0; eps <= epsilon_cap(4); eps += 1e-4) {
      const double v = nll_objective(demos, sup, EpsGreedyNoise{eps}, robot);
      if (v < best) {
        best = v;
        best_eps = eps;
      }
    }
    CHECK(std::abs(eps_hat - best_eps) <= 1e-4 + 1e-12);
  }
}

TEST_CASE("shrinkage closed form on the worked example") {
  Mat sigma_hat(2, 2);
  sigma_hat << 0.5, 0.0, 0.0, 2.0;
  const GaussianShrink shrunk = shrink_gaussian(sigma_hat, 1.0, 2);
  CHECK(shrunk.beta == doctest::Approx(0.2));
  CHECK(shrunk.sigma(0, 0) == doctest::Approx(0.1));
  CHECK(shrunk.sigma(1, 1) == doctest::Approx(0.4));
  CHECK(expected_gaussian_deviation(shrunk.sigma, 2) == doctest::Approx(1.0));
  CHECK(!shrunk.isotropic_fallback);
}

TEST_CASE("alpha = T tr(Sigma-hat) means no rescaling") {
  Mat sigma_hat(2, 2);
  sigma_hat << 0.7, 0.2, 0.2, 1.1;
  const int T = 13;
  const double alpha = expected_gaussian_deviation(sigma_hat, T);
  const GaussianShrink shrunk = shrink_gaussian(sigma_hat, alpha, T);
  CHECK(shrunk.beta == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((shrunk.sigma - sigma_hat).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("alpha = 0 shrinks to the zero matrix") {
  Mat sigma_hat(2, 2);
  sigma_hat << 0.5, 0.0, 0.0, 2.0;
  const GaussianShrink shrunk = shrink_gaussian(sigma_hat, 0.0, 4);
  CHECK(shrunk.sigma.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero-trace estimate falls back to the isotropic target") {
  const GaussianShrink shrunk = shrink_gaussian(Mat::Zero(2, 2), 3.0, 6);
  CHECK(shrunk.isotropic_fallback);
  CHECK(shrunk.sigma(0, 0) == doctest::Approx(0.25));
  CHECK(shrunk.sigma(0, 1) == 0.0);
  // The trace identity still holds in the fallback.
  CHECK(expected_gaussian_deviation(shrunk.sigma, 6) == doctest::Approx(3.0));
}

TEST_CASE("eps shrinkage closed form and clamping") {
  CHECK(shrink_epsilon(0.2, 12 * 0.2, 12, 4) == doctest::Approx(0.2));
  CHECK(shrink_epsilon(0.5, 0.0, 12, 4) == 0.0);
  CHECK(shrink_epsilon(0.1, 100.0, 4, 4) ==
        doctest::Approx(0.75 - 1e-6));
}

TEST_CASE("expected deviation closed form") {
  CHECK(expected_gaussian_deviation(Mat::Identity(2, 2), 10) ==
        doctest::Approx(20.0));
  CHECK(expected_gaussian_deviation(Mat::Zero(3, 3), 7) == 0.0);
}

TEST_CASE("covariance regularization") {
  const Mat r = regularize_covariance(Mat::Zero(2, 2), 1e-6);
  CHECK(r(0, 0) == doctest::Approx(1e-6));
  CHECK(r(0, 1) == 0.0);
  Mat pd(2, 2);
  pd << 2.0, 0.5, 0.5, 1.0;
  const Mat shifted = regularize_covariance(pd, 0.1);
  CHECK(shifted(0, 0) == doctest::Approx(2.1));
  CHECK(shifted(0, 1) == doctest::Approx(0.5));
  Mat asym(2, 2);
  asym << 1.0, 0.2, 0.0, 1.0;
  CHECK_THROWS_AS(regularize_covariance(asym, 1e-6), ConfigError);
  CHECK_THROWS_AS(regularize_covariance(pd, 0.0), ConfigError);
}

TEST_CASE("wishart draws hit the target trace exactly and stay PSD") {
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const int d = 1 + static_cast<int>(rng.uniform_below(4));
    const double target = 0.01 + 4.0 * rng.uniform01();
    const Mat sigma = wishart_random_covariance(d, target, rng);
    CHECK(std::abs(sigma.trace() - target) <= 1e-12 * target);
    Eigen::SelfAdjointEigenSolver<Mat> eig(sigma);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
  }
  Rng r1(5);
  const Mat scalar = wishart_random_covariance(1, 0.7, r1);
  CHECK(scalar(0, 0) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("fault injection: a doubled scale breaks the trace identity") {
  Mat sigma_hat(2, 2);
  sigma_hat << 0.5, 0.1, 0.1, 1.5;
  const GaussianShrink shrunk = shrink_gaussian(sigma_hat, 2.5, 8);
  CHECK(trace_identity_holds(shrunk.sigma, 2.5, 8));
  CHECK(!trace_identity_holds(2.0 * shrunk.sigma, 2.5, 8));
}

TEST_CASE("MLE optimality: random PD perturbations never improve the NLL") {
  Rng rng(29);
  std::vector<std::vector<Vec>> devs;
  for (int m = 0; m < 2; ++m) {
    std::vector<Vec> traj;
    for (int t = 0; t < 10; ++t) traj.push_back(Vec(rng.normal_vector(2)));
    devs.push_back(traj);
  }
  const auto demos = demos_with_deviations(devs);
  const PolicyParams robot = identity_robot(2);
  const Mat sigma_hat = mle_gaussian(demos, robot);
  const Supervisor sup =
      LqrSupervisor{Mat::Zero(2, 2)};  // supervisor_act = 0 = labels
  const double ridge = 1e-8;
  const double nll_hat = nll_objective(
      demos, sup, GaussianNoise{regularize_covariance(sigma_hat, ridge)},
      robot);
  for (int i = 0; i < 100; ++i) {
    const double scale = 0.01 + 0.5 * rng.uniform01();
    const Mat bump =
        wishart_random_covariance(2, scale * sigma_hat.trace(), rng);
    const double nll_pert = nll_objective(
        demos, sup, GaussianNoise{sigma_hat + bump}, robot);
    CHECK(nll_hat <= nll_pert + 1e-9);
  }
}

TEST_CASE("scaling preserves the normalized matrix to 1e-12") {
  Rng rng(31);
  for (int i = 0; i < 50; ++i) {
    const Mat sigma_hat = wishart_random_covariance(3, 1.7, rng);
    const double alpha = 0.01 + 5.0 * rng.uniform01();
    const int T = 1 + static_cast<int>(rng.uniform_below(30));
    const GaussianShrink shrunk = shrink_gaussian(sigma_hat, alpha, T);
    const Mat lhs = shrunk.sigma / shrunk.sigma.trace();
    const Mat rhs = sigma_hat / sigma_hat.trace();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
  }
}
