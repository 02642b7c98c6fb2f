#include "dart/env.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace dart {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // log(2*pi)/2

void check_square(const Mat& m, const char* name) {
  if (m.rows() != m.cols())
    throw ConfigError(std::string(name) + " must be square");
}

/// Symmetric PSD square root via eigendecomposition, eigenvalues clipped at
/// zero. Works for singular covariances, unlike a Cholesky factor.
Mat psd_sqrt(const Mat& sigma) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(sigma);
  if (eig.eigenvalues().minCoeff() < -1e-10)
    throw ConfigError("covariance is not PSD after clipping");
  Vec roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() *
         eig.eigenvectors().transpose();
}

}  // namespace

int GridWorldEnv::move(int cell, int action) const {
  if (cell == goal_id()) return cell;  // absorbing
  auto [x, y] = cell_xy(cell);
  switch (action) {
    case kUp: y += 1; break;
    case kDown: y -= 1; break;
    case kLeft: x -= 1; break;
    case kRight: x += 1; break;
    default: throw ConfigError("gridworld action index out of range");
  }
  x = std::clamp(x, 0, width - 1);
  y = std::clamp(y, 0, height - 1);
  return cell_id(x, y);
}

void validate_env(const Environment& env) {
  if (const auto* pm = std::get_if<LinearPointMassEnv>(&env)) {
    check_square(pm->A, "A");
    check_square(pm->Q, "Q");
    check_square(pm->R, "R");
    const int dx = pm->state_dim();
    const int du = pm->control_dim();
    if (pm->B.rows() != dx) throw ConfigError("B row count must match A");
    if (pm->Q.rows() != dx) throw ConfigError("Q must be d_x x d_x");
    if (pm->R.rows() != du) throw ConfigError("R must be d_u x d_u");
    if (pm->x0_mean.size() != dx || pm->x0_std.size() != dx)
      throw ConfigError("x0_mean/x0_std must have dimension d_x");
    if (pm->process_noise_std < 0)
      throw ConfigError("process_noise_std must be >= 0");
    if (pm->horizon < 1) throw ConfigError("horizon must be >= 1");
    Eigen::SelfAdjointEigenSolver<Mat> eq(pm->Q);
    if (eq.eigenvalues().minCoeff() < -1e-10)
      throw ConfigError("Q must be positive semi-definite");
    Eigen::SelfAdjointEigenSolver<Mat> er(pm->R);
    if (er.eigenvalues().minCoeff() <= 0.0)
      throw ConfigError("R must be positive definite");
    return;
  }
  const auto& gw = std::get<GridWorldEnv>(env);
  if (gw.width < 1 || gw.height < 1)
    throw ConfigError("grid dimensions must be >= 1");
  if (gw.goal_x < 0 || gw.goal_x >= gw.width || gw.goal_y < 0 ||
      gw.goal_y >= gw.height)
    throw ConfigError("goal cell must lie inside the grid");
  if (!(gw.slip >= 0.0 && gw.slip < 1.0))
    throw ConfigError("slip probability must lie in [0, 1)");
  if (gw.horizon < 1) throw ConfigError("horizon must be >= 1");
  if (gw.num_cells() < 2)
    throw ConfigError("grid must contain at least one non-goal cell");
  if (gw.start) {
    const auto [sx, sy] = *gw.start;
    if (sx < 0 || sx >= gw.width || sy < 0 || sy >= gw.height)
      throw ConfigError("start cell must lie inside the grid");
    if (sx == gw.goal_x && sy == gw.goal_y)
      throw ConfigError("start cell must differ from the goal");
  }
}

std::string env_id(const Environment& env) {
  if (std::holds_alternative<LinearPointMassEnv>(env)) return "pointmass";
  const auto& gw = std::get<GridWorldEnv>(env);
  std::ostringstream os;
  os << "gridworld:" << gw.width << "x" << gw.height;
  return os.str();
}

int env_horizon(const Environment& env) {
  return std::visit([](const auto& e) { return e.horizon; }, env);
}

bool env_is_continuous(const Environment& env) {
  return std::holds_alternative<LinearPointMassEnv>(env);
}

int env_control_dim(const Environment& env) {
  if (const auto* pm = std::get_if<LinearPointMassEnv>(&env))
    return pm->control_dim();
  return GridWorldEnv::kNumActions;
}

State sample_initial_state(const Environment& env, Rng& rng) {
  if (const auto* pm = std::get_if<LinearPointMassEnv>(&env)) {
    Vec x = pm->x0_mean;
    for (int i = 0; i < x.size(); ++i) x[i] += pm->x0_std[i] * rng.normal();
    return x;
  }
  const auto& gw = std::get<GridWorldEnv>(env);
  if (gw.start) return gw.cell_id(gw.start->first, gw.start->second);
  const int goal = gw.goal_id();
  // Uniform over non-goal cells.
  int draw = static_cast<int>(rng.uniform_below(
      static_cast<uint64_t>(gw.num_cells() - 1)));
  if (draw >= goal) ++draw;
  return draw;
}

State env_step(const Environment& env, const State& x, const Control& u,
               Rng& rng) {
  if (const auto* pm = std::get_if<LinearPointMassEnv>(&env)) {
    const Vec& xv = state_vec(x);
    const Vec& uv = control_vec(u);
    if (xv.size() != pm->state_dim() || uv.size() != pm->control_dim())
      throw ConfigError("state/control dimension mismatch in env_step");
    Vec next = pm->A * xv + pm->B * uv;
    if (pm->process_noise_std > 0)
      next += pm->process_noise_std * rng.normal_vector(pm->state_dim());
    return next;
  }
  const auto& gw = std::get<GridWorldEnv>(env);
  const int cell = state_index(x);
  int action = control_index(u);
  if (action < 0 || action >= GridWorldEnv::kNumActions)
    throw ConfigError("gridworld control index out of range");
  // Slip before wall clamping.
  if (gw.slip > 0 && rng.uniform01() < gw.slip)
    action = static_cast<int>(rng.uniform_below(GridWorldEnv::kNumActions));
  return gw.move(cell, action);
}

double trajectory_reward(const Environment& env, const Trajectory& traj) {
  if (const auto* pm = std::get_if<LinearPointMassEnv>(&env)) {
    double cost = 0.0;
    for (int t = 0; t < traj.horizon(); ++t) {
      const Vec& xv = state_vec(traj.states[t]);
      const Vec& uv = control_vec(traj.controls[t]);
      cost += xv.dot(pm->Q * xv) + uv.dot(pm->R * uv);
    }
    return -cost;
  }
  const auto& gw = std::get<GridWorldEnv>(env);
  const int goal = gw.goal_id();
  for (const State& s : traj.states)
    if (state_index(s) == goal) return 1.0;
  return 0.0;
}

Mat lqr_gain(const Mat& A, const Mat& B, const Mat& Q, const Mat& R,
             double tol, int max_iters) {
  check_square(A, "A");
  check_square(Q, "Q");
  check_square(R, "R");
  if (B.rows() != A.rows()) throw ConfigError("B row count must match A");
  Mat P = Q;
  double residual = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iters; ++iter) {
    const Mat BtP = B.transpose() * P;
    const Mat gram = R + BtP * B;
    Eigen::LDLT<Mat> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
      throw SolverError("Riccati iteration: R + B'PB is not factorizable");
    const Mat K = ldlt.solve(BtP * A);
    const Mat next = Q + A.transpose() * P * A -
                     (A.transpose() * BtP.transpose()) * K;
    residual = (next - P).cwiseAbs().maxCoeff();
    P = 0.5 * (next + next.transpose());
    if (residual < tol) {
      const Mat gain = Eigen::LDLT<Mat>(R + B.transpose() * P * B)
                           .solve(B.transpose() * P * A);
      // Post-hoc stabilizability check. Skipped when Q = 0: the zero gain is
      // optimal there and there is nothing to stabilize.
      if (Q.cwiseAbs().maxCoeff() > 0.0) {
        const Mat closed = A - B * gain;
        const double radius =
            Eigen::EigenSolver<Mat>(closed).eigenvalues().cwiseAbs().maxCoeff();
        if (radius >= 1.0 + 1e-9) {
          std::ostringstream os;
          os << "LQR closed loop is unstable (spectral radius " << radius
             << "); (A, B) does not look stabilizable";
          throw SolverError(os.str());
        }
      }
      return gain;
    }
  }
  std::ostringstream os;
  os << "Riccati iteration did not converge after " << max_iters
     << " iterations; last residual " << residual;
  throw SolverError(os.str());
}

Supervisor make_lqr_supervisor(const LinearPointMassEnv& env) {
  return LqrSupervisor{lqr_gain(env.A, env.B, env.Q, env.R)};
}

Supervisor make_scripted_supervisor(const GridWorldEnv& env) {
  // BFS from the goal gives shortest-path distances; each cell takes the
  // lowest-index action that strictly decreases the distance.
  const int n = env.num_cells();
  std::vector<int> dist(n, -1);
  std::deque<int> queue;
  dist[env.goal_id()] = 0;
  queue.push_back(env.goal_id());
  while (!queue.empty()) {
    const int cell = queue.front();
    queue.pop_front();
    auto [cx, cy] = env.cell_xy(cell);
    const int nbrs[4][2] = {{cx, cy + 1}, {cx, cy - 1}, {cx - 1, cy},
                            {cx + 1, cy}};
    for (const auto& nb : nbrs) {
      if (nb[0] < 0 || nb[0] >= env.width || nb[1] < 0 || nb[1] >= env.height)
        continue;
      const int id = env.cell_id(nb[0], nb[1]);
      if (dist[id] == -1) {
        dist[id] = dist[cell] + 1;
        queue.push_back(id);
      }
    }
  }
  std::vector<int> table(n, 0);
  for (int cell = 0; cell < n; ++cell) {
    if (cell == env.goal_id()) {
      table[cell] = 0;  // canonical action at the absorbing goal
      continue;
    }
    auto [cx, cy] = env.cell_xy(cell);
    int best_action = -1;
    for (int a = 0; a < GridWorldEnv::kNumActions; ++a) {
      int nx = cx, ny = cy;
      switch (a) {
        case GridWorldEnv::kUp: ny += 1; break;
        case GridWorldEnv::kDown: ny -= 1; break;
        case GridWorldEnv::kLeft: nx -= 1; break;
        case GridWorldEnv::kRight: nx += 1; break;
      }
      if (nx < 0 || nx >= env.width || ny < 0 || ny >= env.height) continue;
      if (dist[env.cell_id(nx, ny)] == dist[cell] - 1) {
        best_action = a;
        break;
      }
    }
    if (best_action < 0)
      throw SolverError("gridworld BFS left a cell without a descent action");
    table[cell] = best_action;
  }
  return ScriptedGridSupervisor{std::move(table), env.width, env.height};
}

Control supervisor_act(const Supervisor& sup, const State& x) {
  if (const auto* lqr = std::get_if<LqrSupervisor>(&sup)) {
    return Vec(-lqr->gain * state_vec(x));
  }
  const auto& scripted = std::get<ScriptedGridSupervisor>(sup);
  const int cell = state_index(x);
  if (cell < 0 || cell >= static_cast<int>(scripted.action_table.size()))
    throw ConfigError("state index outside the scripted supervisor's grid");
  return scripted.action_table[cell];
}

Control noisy_supervisor_act(const Supervisor& sup, const State& x,
                             const NoiseParam& psi, Rng& rng) {
  const Control base = supervisor_act(sup, x);
  if (const auto* g = std::get_if<GaussianNoise>(&psi)) {
    const Vec& mean = control_vec(base);
    if (g->sigma.rows() != mean.size())
      throw ConfigError("Gaussian noise dimension does not match d_u");
    if (g->sigma.cwiseAbs().maxCoeff() == 0.0) return base;
    const Mat root = psd_sqrt(g->sigma);
    return Vec(mean + root * rng.normal_vector(static_cast<int>(mean.size())));
  }
  const double eps = std::get<EpsGreedyNoise>(psi).eps;
  const int preferred = control_index(base);
  if (eps <= 0.0) return base;
  if (rng.uniform01() >= eps) return preferred;
  // Uniform over the K-1 other actions.
  int draw = static_cast<int>(rng.uniform_below(GridWorldEnv::kNumActions - 1));
  if (draw >= preferred) ++draw;
  return draw;
}

double action_log_density(const Supervisor& sup, const State& x,
                          const Control& u, const NoiseParam& psi) {
  const Control base = supervisor_act(sup, x);
  if (const auto* g = std::get_if<GaussianNoise>(&psi)) {
    const Vec& mean = control_vec(base);
    const Vec& uv = control_vec(u);
    const int d = static_cast<int>(mean.size());
    if (g->sigma.rows() != d)
      throw ConfigError("Gaussian noise dimension does not match d_u");
    Eigen::SelfAdjointEigenSolver<Mat> eig(g->sigma);
    if (eig.eigenvalues().minCoeff() <= 0.0)
      throw SolverError(
          "covariance is singular; regularize it (e.g. add ridge * I) "
          "before evaluating densities");
    const Vec diff = uv - mean;
    const Vec w = eig.eigenvectors().transpose() * diff;
    double quad = 0.0, logdet = 0.0;
    for (int i = 0; i < d; ++i) {
      quad += w[i] * w[i] / eig.eigenvalues()[i];
      logdet += std::log(eig.eigenvalues()[i]);
    }
    return -0.5 * quad - 0.5 * logdet - d * kHalfLog2Pi;
  }
  const double eps = std::get<EpsGreedyNoise>(psi).eps;
  const bool agree = control_index(u) == control_index(base);
  if (agree) return std::log1p(-eps);
  if (eps == 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(eps / (GridWorldEnv::kNumActions - 1));
}

PolicyParams supervisor_as_policy(const Supervisor& sup) {
  if (const auto* lqr = std::get_if<LqrSupervisor>(&sup)) {
    return LinearPolicy{-lqr->gain, Vec::Zero(lqr->gain.rows()),
                        FeatureMap{}};
  }
  const auto& scripted = std::get<ScriptedGridSupervisor>(sup);
  TabularPolicy policy;
  policy.default_action = 0;
  for (size_t cell = 0; cell < scripted.action_table.size(); ++cell)
    policy.actions[static_cast<int>(cell)] = scripted.action_table[cell];
  return policy;
}

}  // namespace dart
