#include "dart/types.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace dart {

const Vec& state_vec(const State& s) {
  if (const Vec* v = std::get_if<Vec>(&s)) return *v;
  throw ConfigError("expected a continuous state but got a discrete one");
}

int state_index(const State& s) {
  if (const int* i = std::get_if<int>(&s)) return *i;
  throw ConfigError("expected a discrete state but got a continuous one");
}

const Vec& control_vec(const Control& u) {
  if (const Vec* v = std::get_if<Vec>(&u)) return *v;
  throw ConfigError("expected a continuous control but got a discrete one");
}

int control_index(const Control& u) {
  if (const int* i = std::get_if<int>(&u)) return *i;
  throw ConfigError("expected a discrete control but got a continuous one");
}

bool control_equal(const Control& a, const Control& b) {
  if (a.index() != b.index()) return false;
  if (std::holds_alternative<int>(a))
    return std::get<int>(a) == std::get<int>(b);
  const Vec& va = std::get<Vec>(a);
  const Vec& vb = std::get<Vec>(b);
  return va.size() == vb.size() && va == vb;
}

void validate_trajectory(const Trajectory& traj) {
  if (traj.states.size() != traj.controls.size() + 1)
    throw DataError("trajectory must satisfy |states| = |controls| + 1");
  if (traj.states.empty()) throw DataError("trajectory has no states");
  const bool cont = is_continuous_state(traj.states.front());
  for (const State& s : traj.states) {
    if (is_continuous_state(s) != cont)
      throw DataError("trajectory mixes continuous and discrete states");
    if (cont && !state_vec(s).allFinite())
      throw DataError("trajectory contains a non-finite state");
  }
  for (const Control& u : traj.controls) {
    if (is_continuous_control(u) != cont)
      throw DataError("trajectory controls do not match state type");
    if (cont && !control_vec(u).allFinite())
      throw DataError("trajectory contains a non-finite control");
  }
}

NoiseParam validate_noise(const NoiseParam& psi) {
  if (const EpsGreedyNoise* e = std::get_if<EpsGreedyNoise>(&psi)) {
    if (!(e->eps >= 0.0 && e->eps < 1.0))
      throw ConfigError("eps-greedy noise level must lie in [0, 1)");
    return psi;
  }
  const Mat& sigma = std::get<GaussianNoise>(psi).sigma;
  if (sigma.rows() != sigma.cols())
    throw ConfigError("Gaussian noise covariance must be square");
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10)
    throw ConfigError("Gaussian noise covariance must be symmetric (1e-10)");
  Eigen::SelfAdjointEigenSolver<Mat> eig(sigma);
  if (eig.eigenvalues().minCoeff() < -1e-10)
    throw ConfigError(
        "Gaussian noise covariance has an eigenvalue below -1e-10");
  // Clip tiny negative eigenvalues to zero.
  Vec vals = eig.eigenvalues().cwiseMax(0.0);
  Mat cleaned = eig.eigenvectors() * vals.asDiagonal() *
                eig.eigenvectors().transpose();
  cleaned = 0.5 * (cleaned + cleaned.transpose());
  return GaussianNoise{cleaned};
}

double noise_magnitude(const NoiseParam& psi) {
  if (const GaussianNoise* g = std::get_if<GaussianNoise>(&psi))
    return g->sigma.trace();
  return std::get<EpsGreedyNoise>(psi).eps;
}

bool is_zero_noise(const NoiseParam& psi) {
  if (const GaussianNoise* g = std::get_if<GaussianNoise>(&psi))
    return g->sigma.size() == 0 || g->sigma.cwiseAbs().maxCoeff() == 0.0;
  return std::get<EpsGreedyNoise>(psi).eps == 0.0;
}

NoiseParam zero_noise_like(const NoiseParam& psi) {
  if (const GaussianNoise* g = std::get_if<GaussianNoise>(&psi))
    return GaussianNoise{Mat::Zero(g->sigma.rows(), g->sigma.cols())};
  return EpsGreedyNoise{0.0};
}

Vec FeatureMap::apply(const Vec& x) const {
  Vec out;
  if (selected.empty()) {
    out = x;
  } else {
    out.resize(static_cast<int>(selected.size()));
    for (size_t i = 0; i < selected.size(); ++i) {
      const int idx = selected[i];
      if (idx < 0 || idx >= x.size())
        throw ConfigError("feature index " + std::to_string(idx) +
                          " out of range for state dimension " +
                          std::to_string(x.size()));
      out[static_cast<int>(i)] = x[idx];
    }
  }
  if (clip_abs) {
    const double c = *clip_abs;
    out = out.cwiseMax(-c).cwiseMin(c);
  }
  return out;
}

int FeatureMap::output_dim(int input_dim) const {
  return selected.empty() ? input_dim : static_cast<int>(selected.size());
}

void dataset_note_noise(Dataset& dataset, const NoiseParam& psi) {
  dataset.meta.noise_history.push_back(psi);
}

void append_demonstrations(Dataset& dataset,
                           const std::vector<Demonstration>& demos,
                           int iteration, int first_trajectory_id) {
  int traj_id = first_trajectory_id;
  for (const Demonstration& demo : demos) {
    validate_trajectory(demo.trajectory);
    const int T = demo.trajectory.horizon();
    if (static_cast<int>(demo.labels.size()) != T)
      throw DataError("demonstration labels must cover every step");
    for (int t = 0; t < T; ++t) {
      dataset.records.push_back(DataRecord{
          iteration, traj_id, t, demo.trajectory.states[t], demo.labels[t],
          demo.trajectory.controls[t]});
    }
    ++traj_id;
  }
}

}  // namespace dart
