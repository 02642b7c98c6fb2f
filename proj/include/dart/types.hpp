#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace dart {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Invalid configuration or type mismatch between components.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical routine failed to converge or requires regularization.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed or insufficient data.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// States and controls: continuous vector or discrete index.

using State = std::variant<Vec, int>;
using Control = std::variant<Vec, int>;

inline bool is_continuous_state(const State& s) {
  return std::holds_alternative<Vec>(s);
}
inline bool is_continuous_control(const Control& u) {
  return std::holds_alternative<Vec>(u);
}

const Vec& state_vec(const State& s);
int state_index(const State& s);
const Vec& control_vec(const Control& u);
int control_index(const Control& u);

bool control_equal(const Control& a, const Control& b);

// ---------------------------------------------------------------------------

/// Alternating state/control sequence of fixed horizon T:
/// |states| = |controls| + 1 = T + 1.
struct Trajectory {
  std::vector<State> states;
  std::vector<Control> controls;

  int horizon() const { return static_cast<int>(controls.size()); }
};

/// Throws DataError if the length invariant or type consistency is violated.
void validate_trajectory(const Trajectory& traj);

// ---------------------------------------------------------------------------
// Noise sufficient statistics.

struct GaussianNoise {
  Mat sigma;  // d_u x d_u, symmetric PSD
};

struct EpsGreedyNoise {
  double eps = 0.0;  // in [0, 1)
};

using NoiseParam = std::variant<GaussianNoise, EpsGreedyNoise>;

/// Validates a noise parameter and clips tiny negative eigenvalues of a
/// Gaussian covariance to zero. Throws ConfigError when the matrix is not
/// symmetric within 1e-10, has eigenvalues below -1e-10, or eps is outside
/// [0, 1).
NoiseParam validate_noise(const NoiseParam& psi);

/// tr(Sigma) for Gaussian, eps for eps-greedy.
double noise_magnitude(const NoiseParam& psi);

bool is_zero_noise(const NoiseParam& psi);

NoiseParam zero_noise_like(const NoiseParam& psi);

// ---------------------------------------------------------------------------
// Policies.

/// Optional restriction of the state vector seen by a linear policy: keep a
/// subset of coordinates and/or clip their magnitude. An empty selection
/// means identity.
struct FeatureMap {
  std::vector<int> selected;
  std::optional<double> clip_abs;

  Vec apply(const Vec& x) const;
  int output_dim(int input_dim) const;
  bool is_identity() const { return selected.empty() && !clip_abs; }
};

struct LinearPolicy {
  Mat weights;  // d_u x d_phi
  Vec bias;     // d_u
  FeatureMap features;
};

struct TabularPolicy {
  std::map<int, int> actions;  // state index -> action index
  int default_action = 0;
};

using PolicyParams = std::variant<LinearPolicy, TabularPolicy>;

// ---------------------------------------------------------------------------
// Demonstration data.

/// One collected rollout: the executed trajectory (noise included in the
/// controls), the noiseless supervisor label at every visited state, and the
/// environment reward accumulated while collecting.
struct Demonstration {
  Trajectory trajectory;
  std::vector<Control> labels;  // size T, label for states[0..T-1]
  double reward = 0.0;
};

struct DataRecord {
  int iteration = 0;
  int trajectory_id = 0;
  int t = 0;
  State state;
  Control label;     // noiseless supervisor control at `state`
  Control executed;  // control actually executed (includes injected noise)
};

struct DatasetMeta {
  std::string env_id;
  int horizon = 0;
  uint64_t master_seed = 0;
  std::vector<NoiseParam> noise_history;  // psi used per iteration
};

/// Aggregated (state, supervisor-label) pairs with provenance. Labels are
/// invariant to the injected noise: noise changes which states get visited,
/// never the label recorded at a state.
struct Dataset {
  DatasetMeta meta;
  std::vector<DataRecord> records;
};

/// Appends one record per step of each demonstration.
void append_demonstrations(Dataset& dataset,
                           const std::vector<Demonstration>& demos,
                           int iteration, int first_trajectory_id);

/// Records the noise parameter used for one collection round.
void dataset_note_noise(Dataset& dataset, const NoiseParam& psi);

}  // namespace dart
