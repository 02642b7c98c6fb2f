#pragma once

#include <span>
#include <variant>

#include "dart/types.hpp"

namespace dart {

/// Ridge regression u = W phi(x) + b solved by normal equations; lambda
/// penalizes ||W||_F^2 only (never the bias). The feature map is the
/// sanctioned way to make the learner imperfect (e.g. expose position but
/// not velocity).
struct RidgeSpec {
  double lambda = 0.0;
  FeatureMap features;
  bool use_bias = true;
};

/// Per-state majority vote over labels; ties break to the lowest action
/// index, unseen states fall back to default_action.
struct TabularMajoritySpec {
  int default_action = 0;
};

using LearnerSpec = std::variant<RidgeSpec, TabularMajoritySpec>;

/// Empirical risk minimization on (state, label) records. Throws DataError
/// on an empty dataset and SolverError when the lambda = 0 normal equations
/// are singular (the message says to set lambda > 0).
PolicyParams fit(const LearnerSpec& spec, std::span<const DataRecord> records);

/// Deterministic policy evaluation: W phi(x) + b, or table lookup with the
/// default fallback.
Control predict(const PolicyParams& policy, const State& x);

}  // namespace dart
