#include "dart/learner.hpp"

#include <map>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace dart {

namespace {

PolicyParams fit_ridge(const RidgeSpec& spec,
                       std::span<const DataRecord> records) {
  const Vec& x0 = state_vec(records.front().state);
  const int dx = static_cast<int>(x0.size());
  const int dphi = spec.features.output_dim(dx);
  const int du = static_cast<int>(control_vec(records.front().label).size());
  const int n = static_cast<int>(records.size());
  const int p = dphi + (spec.use_bias ? 1 : 0);

  Mat design(n, p);
  Mat targets(n, du);
  for (int i = 0; i < n; ++i) {
    const Vec phi = spec.features.apply(state_vec(records[i].state));
    if (phi.size() != dphi)
      throw DataError("inconsistent state dimension in dataset");
    design.row(i).head(dphi) = phi.transpose();
    if (spec.use_bias) design(i, dphi) = 1.0;
    const Vec& u = control_vec(records[i].label);
    if (u.size() != du)
      throw DataError("inconsistent control dimension in dataset");
    targets.row(i) = u.transpose();
  }

  Mat gram = design.transpose() * design;
  for (int j = 0; j < dphi; ++j) gram(j, j) += spec.lambda;

  // With lambda > 0 the Gram matrix is PD by construction; with lambda = 0 a
  // rank-deficient design must be reported, not silently pseudo-solved.
  Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
  const double max_eig = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (eig.eigenvalues().minCoeff() <= max_eig * 1e-12)
    throw SolverError(
        "normal equations are singular; set lambda > 0 to regularize");

  const Mat coef = Eigen::LDLT<Mat>(gram).solve(design.transpose() * targets);
  LinearPolicy policy;
  policy.weights = coef.topRows(dphi).transpose();
  policy.bias = spec.use_bias ? Vec(coef.row(dphi).transpose())
                              : Vec(Vec::Zero(du));
  policy.features = spec.features;
  return policy;
}

PolicyParams fit_tabular(const TabularMajoritySpec& spec,
                         std::span<const DataRecord> records) {
  std::map<int, std::map<int, int>> counts;
  for (const DataRecord& rec : records)
    counts[state_index(rec.state)][control_index(rec.label)] += 1;
  TabularPolicy policy;
  policy.default_action = spec.default_action;
  for (const auto& [state, label_counts] : counts) {
    int best_action = -1, best_count = -1;
    for (const auto& [action, count] : label_counts) {
      if (count > best_count) {  // map order makes ties pick the lowest index
        best_action = action;
        best_count = count;
      }
    }
    policy.actions[state] = best_action;
  }
  return policy;
}

}  // namespace

PolicyParams fit(const LearnerSpec& spec,
                 std::span<const DataRecord> records) {
  if (records.empty()) throw DataError("cannot fit a policy on no data");
  if (const auto* ridge = std::get_if<RidgeSpec>(&spec)) {
    if (!std::isfinite(ridge->lambda) || ridge->lambda < 0)
      throw ConfigError("ridge lambda must be finite and >= 0");
    return fit_ridge(*ridge, records);
  }
  return fit_tabular(std::get<TabularMajoritySpec>(spec), records);
}

Control predict(const PolicyParams& policy, const State& x) {
  if (const auto* linear = std::get_if<LinearPolicy>(&policy)) {
    const Vec phi = linear->features.apply(state_vec(x));
    if (phi.size() != linear->weights.cols())
      throw ConfigError("state dimension does not match the linear policy");
    return Vec(linear->weights * phi + linear->bias);
  }
  const auto& tab = std::get<TabularPolicy>(policy);
  const auto it = tab.actions.find(state_index(x));
  return it == tab.actions.end() ? tab.default_action : it->second;
}

}  // namespace dart
