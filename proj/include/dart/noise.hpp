#pragma once

#include <span>

#include "dart/rng.hpp"
#include "dart/types.hpp"

namespace dart {

/// One noise update: the maximum-likelihood estimate and its scaled version,
/// together with the target error alpha and the scaling factor beta.
struct NoiseEstimate {
  NoiseParam raw;     // psi-hat, the MLE
  NoiseParam scaled;  // psi-alpha, after shrinkage scaling
  double alpha = 0.0;
  double beta = 0.0;
  int heldout_demos = 0;
  bool isotropic_fallback = false;  // tr(Sigma-hat) = 0 degenerate case
  // Held-out NLL of the robot's controls under the scaled noise: the
  // tracked divergence proxy for continuous runs, where a delta-vs-density
  // trajectory KL is undefined. +infinity when the noise cannot explain a
  // robot action (eps = 0 with disagreements).
  double heldout_nll = 0.0;
};

/// Maximum-likelihood Gaussian covariance of the robot's deviation from the
/// supervisor on held-out demonstrations:
///   Sigma-hat = 1/(M T) sum_m sum_t d d',  d = predict(robot, x) - label(x).
/// Symmetric PSD by construction. Throws DataError on an empty set.
Mat mle_gaussian(std::span<const Demonstration> heldout,
                 const PolicyParams& robot);

/// Maximum-likelihood eps-greedy level: the mean per-step disagreement rate
/// between the robot and the supervisor labels, clipped to
/// [0, 1 - 1/K - 1e-6]. Throws DataError on an empty set.
double mle_epsilon(std::span<const Demonstration> heldout,
                   const PolicyParams& robot, int num_actions);

double epsilon_cap(int num_actions);  // 1 - 1/K - 1e-6

struct GaussianShrink {
  Mat sigma;   // Sigma-alpha
  double beta = 0.0;
  bool isotropic_fallback = false;
};

/// Scales Sigma-hat so that the simulated per-trajectory squared deviation
/// T tr(Sigma) matches the anticipated final error alpha:
///   Sigma-alpha = alpha / (T tr(Sigma-hat)) * Sigma-hat.
/// Eigen-directions are preserved. When tr(Sigma-hat) = 0 (perfect robot)
/// the scaler falls back to the isotropic matrix alpha/(T d) * I, which
/// still satisfies T tr(Sigma-alpha) = alpha.
GaussianShrink shrink_gaussian(const Mat& sigma_hat, double alpha, int T);

/// Eps-greedy analogue: the per-step expected 0-1 deviation equals eps, so
/// the scaling objective is minimized at eps-alpha = alpha / T, clamped to
/// [0, 1 - 1/K - 1e-6].
double shrink_epsilon(double eps_hat, double alpha, int T, int num_actions);

/// Expected squared deviation of the Gaussian-noised supervisor from its own
/// mean over a horizon: T tr(Sigma).
double expected_gaussian_deviation(const Mat& sigma, int T);

/// Sigma + ridge * I. Throws ConfigError when sigma is not symmetric within
/// 1e-10 or ridge <= 0.
Mat regularize_covariance(const Mat& sigma, double ridge);

/// Sample G with standard normal entries, form G G' (Wishart with d degrees
/// of freedom) and rescale so the trace equals target_trace exactly.
Mat wishart_random_covariance(int dim, double target_trace, Rng& rng);

/// True when T * tr(sigma_scaled) equals alpha within a relative tolerance
/// (absolute when alpha = 0). The scaling-identity verifier used by the
/// oracle suite.
bool trace_identity_holds(const Mat& sigma_scaled, double alpha, int T,
                          double rtol = 1e-9);

}  // namespace dart
