#include "dart/noise.hpp"

#include <algorithm>
#include <cmath>

#include "dart/learner.hpp"

namespace dart {

Mat mle_gaussian(std::span<const Demonstration> heldout,
                 const PolicyParams& robot) {
  if (heldout.empty())
    throw DataError("covariance MLE needs a non-empty held-out set");
  int d = -1;
  long steps = 0;
  Mat scatter;
  for (const Demonstration& demo : heldout) {
    const int T = demo.trajectory.horizon();
    for (int t = 0; t < T; ++t) {
      const Vec& label = control_vec(demo.labels[t]);
      const Vec pred = control_vec(predict(robot, demo.trajectory.states[t]));
      if (d < 0) {
        d = static_cast<int>(label.size());
        scatter = Mat::Zero(d, d);
      }
      if (label.size() != d || pred.size() != d)
        throw DataError("inconsistent control dimension in held-out set");
      const Vec diff = pred - label;
      scatter.noalias() += diff * diff.transpose();
      ++steps;
    }
  }
  if (steps == 0) throw DataError("held-out demonstrations have no steps");
  Mat sigma = scatter / static_cast<double>(steps);
  return 0.5 * (sigma + sigma.transpose());
}

double mle_epsilon(std::span<const Demonstration> heldout,
                   const PolicyParams& robot, int num_actions) {
  if (heldout.empty())
    throw DataError("eps MLE needs a non-empty held-out set");
  long steps = 0, disagreements = 0;
  for (const Demonstration& demo : heldout) {
    const int T = demo.trajectory.horizon();
    for (int t = 0; t < T; ++t) {
      const int label = control_index(demo.labels[t]);
      const int pred =
          control_index(predict(robot, demo.trajectory.states[t]));
      disagreements += (pred != label) ? 1 : 0;
      ++steps;
    }
  }
  if (steps == 0) throw DataError("held-out demonstrations have no steps");
  const double eps_hat =
      static_cast<double>(disagreements) / static_cast<double>(steps);
  return std::clamp(eps_hat, 0.0, epsilon_cap(num_actions));
}

double epsilon_cap(int num_actions) {
  return 1.0 - 1.0 / num_actions - 1e-6;
}

GaussianShrink shrink_gaussian(const Mat& sigma_hat, double alpha, int T) {
  if (alpha < 0) throw ConfigError("alpha must be >= 0");
  if (T < 1) throw ConfigError("horizon must be >= 1");
  const double trace = sigma_hat.trace();
  const int d = static_cast<int>(sigma_hat.rows());
  if (trace <= 0.0) {
    // Perfect-robot degenerate case: spread the target error isotropically.
    GaussianShrink out;
    out.sigma = (alpha / (T * static_cast<double>(d))) *
                Mat::Identity(d, d);
    out.beta = 0.0;
    out.isotropic_fallback = true;
    return out;
  }
  GaussianShrink out;
  out.beta = alpha / (T * trace);
  out.sigma = out.beta * sigma_hat;
  out.isotropic_fallback = false;
  return out;
}

double shrink_epsilon(double eps_hat, double alpha, int T, int num_actions) {
  (void)eps_hat;  // the per-step 0-1 deviation equals eps itself
  if (alpha < 0) throw ConfigError("alpha must be >= 0");
  if (T < 1) throw ConfigError("horizon must be >= 1");
  return std::clamp(alpha / T, 0.0, epsilon_cap(num_actions));
}

double expected_gaussian_deviation(const Mat& sigma, int T) {
  return T * sigma.trace();
}

Mat regularize_covariance(const Mat& sigma, double ridge) {
  if (!(ridge > 0)) throw ConfigError("ridge must be > 0");
  if (sigma.rows() != sigma.cols())
    throw ConfigError("covariance must be square");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw ConfigError("covariance must be symmetric within 1e-10");
  return sigma + ridge * Mat::Identity(sigma.rows(), sigma.cols());
}

Mat wishart_random_covariance(int dim, double target_trace, Rng& rng) {
  if (!(target_trace > 0)) throw ConfigError("target_trace must be > 0");
  if (dim < 1) throw ConfigError("dimension must be >= 1");
  Mat g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = rng.normal();
  Mat sigma = g * g.transpose();
  sigma *= target_trace / sigma.trace();
  return 0.5 * (sigma + sigma.transpose());
}

bool trace_identity_holds(const Mat& sigma_scaled, double alpha, int T,
                          double rtol) {
  const double simulated = expected_gaussian_deviation(sigma_scaled, T);
  if (alpha == 0.0) return std::abs(simulated) <= rtol;
  return std::abs(simulated - alpha) <= rtol * std::abs(alpha);
}

}  // namespace dart
