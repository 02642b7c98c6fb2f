#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>

#include "dart/rng.hpp"
#include "dart/types.hpp"

namespace dart {

/// Linear-Gaussian dynamics x' = A x + B u + w, w ~ N(0, sigma_w^2 I), with
/// quadratic cost matrices Q (PSD) and R (PD) used only for reward reporting.
struct LinearPointMassEnv {
  Mat A;
  Mat B;
  double process_noise_std = 0.0;
  Vec x0_mean;
  Vec x0_std;  // per-dimension std of the initial state
  Mat Q;
  Mat R;
  int horizon = 1;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int control_dim() const { return static_cast<int>(B.cols()); }
};

/// Grid of width x height cells with four actions (up, down, left, right),
/// slip noise (executed action replaced by a uniformly random one with
/// probability `slip`, applied before wall clamping), an absorbing goal cell
/// worth reward 1, and an initial distribution over non-goal cells: uniform,
/// or a fixed start cell when `start` is set.
struct GridWorldEnv {
  int width = 1;
  int height = 1;
  int goal_x = 0;
  int goal_y = 0;
  double slip = 0.0;
  int horizon = 1;
  std::optional<std::pair<int, int>> start;

  static constexpr int kNumActions = 4;
  static constexpr int kUp = 0;     // y + 1
  static constexpr int kDown = 1;   // y - 1
  static constexpr int kLeft = 2;   // x - 1
  static constexpr int kRight = 3;  // x + 1

  int num_cells() const { return width * height; }
  int cell_id(int x, int y) const { return y * width + x; }
  std::pair<int, int> cell_xy(int id) const {
    return {id % width, id / width};
  }
  int goal_id() const { return cell_id(goal_x, goal_y); }

  /// Deterministic move of `action` from `cell`, clamped at walls; the goal
  /// is absorbing regardless of action.
  int move(int cell, int action) const;
};

using Environment = std::variant<LinearPointMassEnv, GridWorldEnv>;

/// Checks dimension consistency, Q PSD / R PD (eigenvalue tests at -1e-10 /
/// > 0), goal inside the grid and slip < 1. Throws ConfigError.
void validate_env(const Environment& env);

std::string env_id(const Environment& env);
int env_horizon(const Environment& env);
bool env_is_continuous(const Environment& env);
int env_control_dim(const Environment& env);  // d_u or number of actions

State sample_initial_state(const Environment& env, Rng& rng);

/// One dynamics step. Continuous: x' = A x + B u + w. Discrete: slip, then
/// clamped move, absorbing at the goal.
State env_step(const Environment& env, const State& x, const Control& u,
               Rng& rng);

/// Point-mass: -sum_t (x_t'Q x_t + u_t'R u_t) over t = 0..T-1 (terminal
/// state excluded). Gridworld: 1 if the goal is reached within T, else 0.
/// Reporting only; never used for learning.
double trajectory_reward(const Environment& env, const Trajectory& traj);

/// Solves the discrete algebraic Riccati equation for (A, B, Q, R) by fixed
/// point iteration (abs tol, max iterations) and returns the state-feedback
/// gain; the supervisor acts as u = -K x. Throws SolverError with the last
/// residual on non-convergence.
Mat lqr_gain(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
             double tol = 1e-9, int max_iters = 10000);

struct LqrSupervisor {
  Mat gain;  // d_u x d_x
};

/// Shortest-path action table built by breadth-first search from the goal;
/// every non-goal cell moves strictly closer, the goal cell emits action 0.
struct ScriptedGridSupervisor {
  std::vector<int> action_table;  // per cell id
  int width = 0;
  int height = 0;
};

using Supervisor = std::variant<LqrSupervisor, ScriptedGridSupervisor>;

Supervisor make_lqr_supervisor(const LinearPointMassEnv& env);
Supervisor make_scripted_supervisor(const GridWorldEnv& env);

Control supervisor_act(const Supervisor& sup, const State& x);

/// Gaussian: supervisor action plus a draw from N(0, Sigma), sampled through
/// the symmetric eigenvalue square root so PSD-but-singular covariances are
/// allowed. Eps-greedy: supervisor action with probability 1-eps, otherwise
/// uniform over the other K-1 actions.
Control noisy_supervisor_act(const Supervisor& sup, const State& x,
                             const NoiseParam& psi, Rng& rng);

/// Log pi*(u | x, psi). Gaussian requires a strictly PD covariance (throws
/// SolverError instructing the caller to regularize otherwise). Eps-greedy:
/// log(1-eps) on agreement, log(eps/(K-1)) otherwise; -infinity when eps = 0
/// and u differs from the supervisor action.
double action_log_density(const Supervisor& sup, const State& x,
                          const Control& u, const NoiseParam& psi);

/// The supervisor as an evaluable policy (exact, not an approximation).
PolicyParams supervisor_as_policy(const Supervisor& sup);

}  // namespace dart
