#include "dart/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>

#include "dart/rollout.hpp"
#include "dart/serialize.hpp"

namespace dart {

namespace {

namespace fs = std::filesystem;

constexpr double kInf = std::numeric_limits<double>::infinity();

double sample_sd(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double mean_of(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

}  // namespace

std::string resolve_output_dir(const ExperimentConfig& config,
                               const RunOptions& options) {
  if (!options.out_dir_override.empty()) return options.out_dir_override;
  if (!config.output_dir.empty()) return config.output_dir;
  if (const char* root = std::getenv("DART_OUT_ROOT"))
    return (fs::path(root) / config.experiment).string();
  return (fs::path("out") / config.experiment).string();
}

std::vector<MetricRow> trace_to_rows(const AlgorithmConfig& cfg,
                                     uint64_t seed, const RunTrace& trace) {
  std::vector<MetricRow> rows;
  auto push = [&rows, &cfg, seed](int iteration, const char* metric,
                                  double value) {
    rows.push_back(MetricRow{cfg.name, seed, iteration, metric, value});
  };
  push(0, "supervisor_reward", trace.supervisor_reward_mean);
  const double baseline = trace.supervisor_reward_mean;
  for (const IterationRecord& rec : trace.iterations) {
    const int k = rec.iteration;
    push(k, "n_demos", rec.cumulative_demos);
    push(k, "n_records", rec.cumulative_records);
    push(k, "collection_reward", rec.collection_reward_mean);
    push(k, "collection_reward_norm",
         std::abs(baseline) > 1e-12
             ? rec.collection_reward_mean / std::abs(baseline)
             : rec.collection_reward_mean);
    if (!rec.mixture_collection)
      push(k, "noise_magnitude", noise_magnitude(rec.psi_used));
    if (rec.noise_update) {
      push(k, "noise_alpha", rec.noise_update->alpha);
      push(k, "noise_beta", rec.noise_update->beta);
      push(k, "noise_hat_magnitude", noise_magnitude(rec.noise_update->raw));
      push(k, "noise_scaled_magnitude",
           noise_magnitude(rec.noise_update->scaled));
      push(k, "noise_heldout_nll", rec.noise_update->heldout_nll);
    }
    if (rec.eval) {
      const EvalRecord& e = *rec.eval;
      push(k, "loss_robot", e.loss_robot);
      push(k, "loss_robot_stderr", e.loss_robot_stderr);
      push(k, "loss_collection", e.loss_collection);
      push(k, "loss_collection_stderr", e.loss_collection_stderr);
      push(k, "loss_supervisor", e.loss_supervisor);
      push(k, "loss_supervisor_stderr", e.loss_supervisor_stderr);
      push(k, "shift", e.shift);
      push(k, "reward_eval", e.reward_eval);
      push(k, "reward_eval_stderr", e.reward_eval_stderr);
      push(k, "training_loss", e.training_loss);
    }
  }
  return rows;
}

std::string rows_to_csv(const std::string& experiment,
                        const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "experiment,algorithm,seed,iteration,metric,value\n";
  for (const MetricRow& row : rows) {
    out << csv_escape(experiment) << ',' << csv_escape(row.algorithm) << ','
        << row.seed << ',' << row.iteration << ',' << csv_escape(row.metric)
        << ',' << format_double(row.value) << '\n';
  }
  return out.str();
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const RunOptions& options) {
  validate_config(config);
  const std::vector<uint64_t>& seeds =
      options.seed_override.empty() ? config.seeds : options.seed_override;
  const Supervisor sup = make_supervisor(config);

  struct Task {
    const AlgorithmConfig* algo;
    uint64_t seed;
  };
  std::vector<Task> tasks;
  for (const AlgorithmConfig& algo : config.algorithms)
    for (uint64_t seed : seeds) tasks.push_back(Task{&algo, seed});

  struct TaskOutput {
    std::vector<MetricRow> rows;
    std::string dataset_text;
    std::string policy_text;
    std::string stem;
    bool completed = false;
    std::string error;
  };
  std::vector<TaskOutput> outputs(tasks.size());

  auto run_task = [&](size_t index) {
    const Task& task = tasks[index];
    TaskOutput& out = outputs[index];
    out.stem = task.algo->name + "__seed" + std::to_string(task.seed);
    try {
      RunContext ctx{config.env,
                     sup,
                     config.learner,
                     default_loss(config.env),
                     config.eval_rollouts,
                     config.subsample_per_trajectory,
                     task.seed};
      const RunTrace trace = run_algorithm(ctx, *task.algo);
      out.rows = trace_to_rows(*task.algo, task.seed, trace);
      out.dataset_text = dataset_to_jsonl(trace.dataset);
      out.policy_text = policy_to_json(trace.final_policy).dump(2) + "\n";
      out.completed = true;
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  };

  const int jobs = std::clamp(options.jobs, 1, 64);
  if (jobs == 1 || tasks.size() <= 1) {
    for (size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&]() {
        for (;;) {
          const size_t i = next.fetch_add(1);
          if (i >= tasks.size()) return;
          run_task(i);
        }
      });
    }
    for (std::thread& t : workers) t.join();
  }

  ExperimentResult result;
  result.experiment = config.experiment;
  for (TaskOutput& out : outputs)
    result.rows.insert(result.rows.end(), out.rows.begin(), out.rows.end());
  result.results_csv = rows_to_csv(config.experiment, result.rows);

  if (options.write_artifacts) {
    const fs::path out_dir = resolve_output_dir(config, options);
    fs::create_directories(out_dir / "datasets");
    fs::create_directories(out_dir / "policies");
    write_file((out_dir / "results.csv").string(), result.results_csv);
    write_file((out_dir / "config.json").string(),
               config_to_json(config).dump(2) + "\n");
    for (const TaskOutput& out : outputs) {
      if (!out.completed) continue;
      write_file((out_dir / "datasets" / (out.stem + ".jsonl")).string(),
                 out.dataset_text);
      write_file((out_dir / "policies" / (out.stem + ".json")).string(),
                 out.policy_text);
    }
    result.output_dir = out_dir.string();
  }

  // A mid-run failure still flushes whatever completed, then reports.
  for (const TaskOutput& out : outputs) {
    if (out.completed) continue;
    std::string message = "run " + out.stem + " failed: " + out.error;
    if (options.write_artifacts)
      message += "; partial results flushed to " + result.output_dir;
    throw DataError(message);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Curves.

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

std::vector<CurvePoint> compute_curves(const std::string& results_csv,
                                       const std::string& metric) {
  std::istringstream in(results_csv);
  std::string line;
  if (!std::getline(in, line)) throw DataError("results CSV is empty");

  struct Key {
    std::string algorithm;
    int iteration;
    uint64_t seed;
    bool operator<(const Key& o) const {
      return std::tie(algorithm, iteration, seed) <
             std::tie(o.algorithm, o.iteration, o.seed);
    }
  };
  std::map<Key, double> metric_values;
  std::map<Key, double> demo_values;
  std::set<std::string> available;
  std::vector<std::string> algo_order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 6) throw DataError("malformed results CSV row");
    const Key key{fields[1], std::stoi(fields[3]),
                  static_cast<uint64_t>(std::stoull(fields[2]))};
    available.insert(fields[4]);
    if (std::find(algo_order.begin(), algo_order.end(), fields[1]) ==
        algo_order.end())
      algo_order.push_back(fields[1]);
    if (fields[4] == metric) metric_values[key] = std::stod(fields[5]);
    if (fields[4] == "n_demos") demo_values[key] = std::stod(fields[5]);
  }
  if (!available.count(metric)) {
    std::string list;
    for (const std::string& name : available) {
      if (!list.empty()) list += ", ";
      list += name;
    }
    throw ConfigError("unknown metric '" + metric +
                      "'; available metrics: " + list);
  }

  // Group metric values per (algorithm, iteration) across seeds.
  struct Group {
    std::vector<double> values;
    std::vector<double> demos;
  };
  std::map<std::pair<std::string, int>, Group> groups;
  for (const auto& [key, value] : metric_values) {
    Group& g = groups[{key.algorithm, key.iteration}];
    g.values.push_back(value);
    const auto demo_it = demo_values.find(key);
    if (demo_it != demo_values.end()) g.demos.push_back(demo_it->second);
  }

  std::vector<CurvePoint> points;
  for (const std::string& algo : algo_order) {
    for (const auto& [group_key, g] : groups) {
      if (group_key.first != algo) continue;
      CurvePoint p;
      p.algorithm = algo;
      p.iteration = group_key.second;
      p.n_demos = g.demos.empty() ? 0.0 : mean_of(g.demos);
      p.mean = mean_of(g.values);
      p.n_seeds = static_cast<int>(g.values.size());
      p.stderr_ = g.values.size() > 1
                      ? sample_sd(g.values) /
                            std::sqrt(static_cast<double>(g.values.size()))
                      : 0.0;
      points.push_back(std::move(p));
    }
  }
  return points;
}

std::string curves_to_csv(const std::vector<CurvePoint>& points) {
  std::ostringstream out;
  out << "algorithm,iteration,n_demos,mean,stderr,n_seeds\n";
  for (const CurvePoint& p : points) {
    out << csv_escape(p.algorithm) << ',' << p.iteration << ','
        << format_double(p.n_demos) << ',' << format_double(p.mean) << ','
        << format_double(p.stderr_) << ',' << p.n_seeds << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Oracle suite.

namespace {

/// Synthetic continuous held-out set: random states, a random linear
/// supervisor labeling them, and a distinct random linear robot.
struct ContinuousInstance {
  std::vector<Demonstration> demos;
  PolicyParams robot;
  Supervisor sup;
  int total_steps = 0;
};

ContinuousInstance random_continuous_instance(Rng& rng, int dim) {
  ContinuousInstance inst;
  const int n_trajs = 2 + static_cast<int>(rng.uniform_below(3));
  const int T = 5 + static_cast<int>(rng.uniform_below(6));
  Mat w_sup(dim, dim), w_rob(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      w_sup(i, j) = 0.6 * rng.normal();
      w_rob(i, j) = w_sup(i, j) + 0.4 * rng.normal();
    }
  inst.sup = LqrSupervisor{-w_sup};
  inst.robot = LinearPolicy{w_rob, Vec::Zero(dim), FeatureMap{}};
  for (int m = 0; m < n_trajs; ++m) {
    Demonstration demo;
    for (int t = 0; t <= T; ++t)
      demo.trajectory.states.push_back(State(rng.normal_vector(dim)));
    for (int t = 0; t < T; ++t) {
      const Vec label = w_sup * state_vec(demo.trajectory.states[t]);
      demo.labels.push_back(Control(label));
      demo.trajectory.controls.push_back(Control(label));
    }
    inst.demos.push_back(std::move(demo));
  }
  inst.total_steps = n_trajs * T;
  return inst;
}

/// Mean per-trajectory Gaussian NLL from the scatter matrix; algebraically
/// identical to nll_objective but O(1) per candidate, for dense searches.
double gaussian_nll_from_scatter(const Mat& sigma, const Mat& scatter,
                                 int n_steps, int n_trajs) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(sigma);
  if (eig.eigenvalues().minCoeff() <= 0.0) return kInf;
  const int d = static_cast<int>(sigma.rows());
  double logdet = 0.0;
  for (int i = 0; i < d; ++i) logdet += std::log(eig.eigenvalues()[i]);
  const Mat inv = eig.eigenvectors() *
                  eig.eigenvalues().cwiseInverse().asDiagonal() *
                  eig.eigenvectors().transpose();
  const double quad = (inv * scatter).trace();
  const double total = 0.5 * (n_steps * (d * std::log(2.0 * M_PI) + logdet) +
                              quad);
  return total / n_trajs;
}

/// Random stochastic gridworld policy: deterministic table softened to an
/// eps-greedy density.
ActionDensityFn eps_table_density(const TabularPolicy& table, double eps) {
  return [table, eps](int cell) {
    std::vector<double> probs(GridWorldEnv::kNumActions,
                              eps / (GridWorldEnv::kNumActions - 1));
    probs[control_index(predict(table, cell))] = 1.0 - eps;
    return probs;
  };
}

TabularPolicy random_table(Rng& rng, int n_cells) {
  TabularPolicy table;
  table.default_action = 0;
  for (int cell = 0; cell < n_cells; ++cell)
    table.actions[cell] =
        static_cast<int>(rng.uniform_below(GridWorldEnv::kNumActions));
  return table;
}

GridWorldEnv oracle_grid(double slip) {
  GridWorldEnv env;
  env.width = 3;
  env.height = 3;
  env.goal_x = 2;
  env.goal_y = 2;
  env.slip = slip;
  env.horizon = 4;
  return env;
}

LinearPointMassEnv oracle_pointmass() {
  LinearPointMassEnv env;
  env.A = (Mat(2, 2) << 1.0, 0.1, 0.0, 1.0).finished();
  env.B = (Mat(2, 2) << 0.005, 0.0, 0.0, 0.1).finished();
  env.process_noise_std = 0.01;
  env.x0_mean = Vec::Zero(2);
  env.x0_std = Vec::Ones(2);
  env.Q = Mat::Identity(2, 2);
  env.R = Mat::Identity(2, 2);
  env.horizon = 25;
  return env;
}

}  // namespace

OracleCheck check_gaussian_mle_closed_form(int n_sets, double tol,
                                           uint64_t seed) {
  OracleCheck check;
  check.name = "gaussian-mle-closed-form";
  check.rhs = tol;
  double worst = -kInf;
  const Rng base((seed));
  for (int s = 0; s < n_sets; ++s) {
    Rng rng = base.stream(static_cast<uint64_t>(s));
    const ContinuousInstance inst = random_continuous_instance(rng, 2);
    const Mat sigma_hat = mle_gaussian(inst.demos, inst.robot);

    Mat scatter = Mat::Zero(2, 2);
    for (const Demonstration& demo : inst.demos)
      for (int t = 0; t < demo.trajectory.horizon(); ++t) {
        const Vec diff =
            control_vec(predict(inst.robot, demo.trajectory.states[t])) -
            control_vec(demo.labels[t]);
        scatter += diff * diff.transpose();
      }
    const int n_trajs = static_cast<int>(inst.demos.size());

    // 21 x 21 x 23 = 10143 Cholesky-parameterized candidates around the
    // data scale.
    const double scale =
        std::sqrt(scatter.trace() / (2.0 * inst.total_steps));
    double best_nll = kInf;
    Mat best_sigma = Mat::Identity(2, 2);
    for (int i = 0; i < 21; ++i) {
      const double l11 = scale * std::pow(10.0, -1.2 + 2.0 * i / 20.0);
      for (int j = 0; j < 21; ++j) {
        const double l22 = scale * std::pow(10.0, -1.2 + 2.0 * j / 20.0);
        for (int k = 0; k < 23; ++k) {
          const double l21 = scale * (-2.0 + 4.0 * k / 22.0);
          Mat chol(2, 2);
          chol << l11, 0.0, l21, l22;
          const Mat candidate = chol * chol.transpose();
          const double nll = gaussian_nll_from_scatter(
              candidate, scatter, inst.total_steps, n_trajs);
          if (nll < best_nll) {
            best_nll = nll;
            best_sigma = candidate;
          }
        }
      }
    }
    const double nll_hat = nll_objective(inst.demos, inst.sup,
                                         GaussianNoise{sigma_hat}, inst.robot);
    const double nll_best = nll_objective(
        inst.demos, inst.sup, GaussianNoise{best_sigma}, inst.robot);
    worst = std::max(worst, nll_hat - nll_best);
  }
  check.lhs = worst;
  check.pass = worst <= tol;
  check.detail = "max over sets of NLL(closed form) - NLL(best of search)";
  return check;
}

OracleCheck check_eps_mle_grid(int n_sets, double grid_step, uint64_t seed) {
  OracleCheck check;
  check.name = "eps-mle-grid-argmin";
  check.rhs = grid_step;
  const int n_states = 6;
  const int K = GridWorldEnv::kNumActions;
  double worst = 0.0;
  const Rng base((seed));
  for (int s = 0; s < n_sets; ++s) {
    Rng rng = base.stream(static_cast<uint64_t>(s));
    std::vector<int> sup_table(n_states);
    TabularPolicy robot;
    for (int i = 0; i < n_states; ++i) {
      sup_table[i] = static_cast<int>(rng.uniform_below(K));
      robot.actions[i] = static_cast<int>(rng.uniform_below(K));
    }
    const Supervisor sup =
        ScriptedGridSupervisor{sup_table, n_states, 1};
    const int n_trajs = 1 + static_cast<int>(rng.uniform_below(3));
    const int T = 4 + static_cast<int>(rng.uniform_below(5));
    std::vector<Demonstration> demos;
    for (int m = 0; m < n_trajs; ++m) {
      Demonstration demo;
      for (int t = 0; t <= T; ++t)
        demo.trajectory.states.push_back(
            static_cast<int>(rng.uniform_below(n_states)));
      for (int t = 0; t < T; ++t) {
        const int cell = state_index(demo.trajectory.states[t]);
        demo.labels.push_back(sup_table[cell]);
        demo.trajectory.controls.push_back(sup_table[cell]);
      }
      demos.push_back(std::move(demo));
    }
    const double eps_hat = mle_epsilon(demos, robot, K);
    const double cap = epsilon_cap(K);
    double best_eps = 0.0, best_nll = kInf;
    for (double eps = 0.0; eps <= cap + 1e-12; eps += grid_step) {
      const double nll =
          nll_objective(demos, sup, EpsGreedyNoise{std::min(eps, cap)},
                        robot);
      if (nll < best_nll) {
        best_nll = nll;
        best_eps = std::min(eps, cap);
      }
    }
    worst = std::max(worst, std::abs(eps_hat - best_eps));
  }
  check.lhs = worst;
  check.pass = worst <= grid_step + 1e-12;
  check.detail = "max |eps-hat - grid argmin| over instances";
  return check;
}

OracleCheck check_shrink_trace_identity(int n_cases, double rtol,
                                        uint64_t seed) {
  OracleCheck check;
  check.name = "shrink-trace-identity";
  check.rhs = rtol;
  double worst_rel = 0.0, worst_shape = 0.0;
  const Rng base((seed));
  for (int s = 0; s < n_cases; ++s) {
    Rng rng = base.stream(static_cast<uint64_t>(s));
    const int d = 1 + static_cast<int>(rng.uniform_below(4));
    const double trace = 0.01 + 5.0 * rng.uniform01();
    const Mat sigma_hat = wishart_random_covariance(d, trace, rng);
    const double alpha = 0.01 + 10.0 * rng.uniform01();
    const int T = 1 + static_cast<int>(rng.uniform_below(50));
    const GaussianShrink shrunk = shrink_gaussian(sigma_hat, alpha, T);
    const double simulated = expected_gaussian_deviation(shrunk.sigma, T);
    worst_rel = std::max(worst_rel, std::abs(simulated - alpha) / alpha);
    if (!trace_identity_holds(shrunk.sigma, alpha, T, rtol)) worst_rel = kInf;
    const Mat lhs_norm = shrunk.sigma / shrunk.sigma.trace();
    const Mat rhs_norm = sigma_hat / sigma_hat.trace();
    worst_shape = std::max(
        worst_shape, (lhs_norm - rhs_norm).cwiseAbs().maxCoeff());
  }
  check.lhs = worst_rel;
  check.pass = worst_rel <= rtol && worst_shape <= 1e-12;
  std::ostringstream detail;
  detail << "max normalized-matrix drift " << worst_shape << " (tol 1e-12)";
  check.detail = detail.str();
  return check;
}

OracleCheck check_gaussian_deviation_mc(int n_sigmas, int n_rollouts,
                                        double rtol, uint64_t seed) {
  OracleCheck check;
  check.name = "gaussian-deviation-mc";
  check.rhs = rtol;
  const LinearPointMassEnv pm = oracle_pointmass();
  const Environment env = pm;
  const Supervisor sup = make_lqr_supervisor(pm);
  const int T = pm.horizon;
  double worst = 0.0;
  const Rng base((seed));
  for (int s = 0; s < n_sigmas; ++s) {
    Rng rng = base.stream(static_cast<uint64_t>(s));
    const double trace = 0.05 + 2.0 * rng.uniform01();
    const Mat sigma = wishart_random_covariance(2, trace, rng);
    const auto demos =
        collect_demonstrations(env, sup, GaussianNoise{sigma}, n_rollouts, T,
                               base.stream(1000 + s), 0);
    double total = 0.0;
    for (const Demonstration& demo : demos) {
      for (int t = 0; t < T; ++t)
        total += (control_vec(demo.trajectory.controls[t]) -
                  control_vec(demo.labels[t]))
                     .squaredNorm();
    }
    const double mc = total / n_rollouts;
    const double exact = expected_gaussian_deviation(sigma, T);
    worst = std::max(worst, std::abs(mc - exact) / exact);
  }
  check.lhs = worst;
  check.pass = worst <= rtol;
  check.detail = "max relative error of MC deviation vs T tr(Sigma)";
  return check;
}

OracleCheck check_shift_bound_sweep(int n_pairs, uint64_t seed) {
  OracleCheck check;
  check.name = "shift-kl-bound-sweep";
  const GridWorldEnv env = oracle_grid(0.0);
  const int T = 4;
  const LossSpec loss{LossKind::ZeroOne, std::nullopt};
  int violations = 0, infinite_cases = 0;
  double worst_margin = -kInf;
  const Rng base((seed));
  for (int s = 0; s < n_pairs; ++s) {
    Rng rng = base.stream(static_cast<uint64_t>(s));
    const TabularPolicy robot = random_table(rng, env.num_cells());
    const TabularPolicy sup = random_table(rng, env.num_cells());
    const double eps_p =
        rng.uniform01() < 0.15 ? 0.0 : 0.05 + 0.85 * rng.uniform01();
    const double eps_q =
        rng.uniform01() < 0.10 ? 0.0 : 0.05 + 0.85 * rng.uniform01();
    const EnumeratedDistribution p =
        enumerate_distribution(env, eps_table_density(robot, eps_p), T);
    const EnumeratedDistribution q =
        enumerate_distribution(env, eps_table_density(sup, eps_q), T);
    const BoundCheck bound =
        check_shift_kl_bound(p, q, robot, sup, loss, T);
    if (!bound.holds) ++violations;
    if (bound.rhs_infinite)
      ++infinite_cases;
    else
      worst_margin = std::max(worst_margin, bound.lhs - bound.rhs);
  }
  check.lhs = worst_margin;
  check.rhs = 0.0;
  check.pass = violations == 0;
  std::ostringstream detail;
  detail << violations << " violations, " << infinite_cases
         << " infinite-KL cases (bound trivial there)";
  check.detail = detail.str();
  return check;
}

OracleCheck check_tv_bound_sweep(int n_triples, uint64_t seed) {
  OracleCheck check;
  check.name = "tv-expectation-bound-sweep";
  int violations = 0;
  double worst_margin = -kInf;
  const Rng base((seed));
  for (int s = 0; s < n_triples; ++s) {
    Rng rng = base.stream(static_cast<uint64_t>(s));
    const double B = (s % 2 == 0) ? 1.0 : 5.0;
    const int n = 10;
    std::vector<double> p(n), q(n), f(n);
    double sp = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
      p[i] = rng.uniform01() + 1e-12;
      q[i] = rng.uniform01() + 1e-12;
      f[i] = B * rng.uniform01();
      sp += p[i];
      sq += q[i];
    }
    for (int i = 0; i < n; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    const BoundCheck bound = check_tv_expectation_bound(p, q, f, B);
    if (!bound.holds) ++violations;
    worst_margin = std::max(worst_margin, bound.lhs - bound.rhs);
  }
  check.lhs = worst_margin;
  check.rhs = 0.0;
  check.pass = violations == 0;
  check.detail = std::to_string(violations) + " violations";
  return check;
}

OracleCheck check_noise_kl_cases(uint64_t seed) {
  (void)seed;
  OracleCheck check;
  check.name = "noise-kl-finiteness";
  GridWorldEnv env = oracle_grid(0.0);
  env.horizon = 3;
  const Supervisor sup = make_scripted_supervisor(env);
  TabularPolicy disagreeing =
      std::get<TabularPolicy>(supervisor_as_policy(sup));
  // Flip two non-goal cells so the robot errs on its own distribution.
  disagreeing.actions[0] = (disagreeing.actions[0] + 1) % 4;
  disagreeing.actions[1] = (disagreeing.actions[1] + 1) % 4;

  const NoiseKlReport strict =
      check_noise_kl_finiteness(env, sup, disagreeing, 0.1, 3);
  const NoiseKlReport agreeing = check_noise_kl_finiteness(
      env, sup, std::get<TabularPolicy>(supervisor_as_policy(sup)), 0.1, 3);
  const NoiseKlReport zero_eps =
      check_noise_kl_finiteness(env, sup, disagreeing, 0.0, 3);

  check.pass = strict.premise_holds && strict.strict_reduction &&
               !strict.kl_vs_noisy.infinite &&
               strict.kl_vs_noiseless.infinite && !agreeing.premise_holds &&
               zero_eps.kl_vs_noisy.infinite && !zero_eps.strict_reduction;
  check.lhs = strict.kl_vs_noisy.value;
  check.rhs = kInf;
  std::ostringstream detail;
  detail << "robot error " << strict.robot_error
         << "; KL vs eps=0.1 noise " << strict.kl_vs_noisy.value
         << ", KL vs noiseless infinite; agreeing robot premise violated";
  check.detail = detail.str();
  return check;
}

OracleCheck check_kl_properties(int n_pairs, uint64_t seed) {
  OracleCheck check;
  check.name = "kl-gibbs-pinsker";
  double worst = 0.0;
  const Rng base((seed));
  const int T = 3;
  for (int s = 0; s < n_pairs; ++s) {
    Rng rng = base.stream(static_cast<uint64_t>(s));
    const GridWorldEnv env = oracle_grid(s % 3 == 0 ? 0.1 : 0.0);
    const TabularPolicy a = random_table(rng, env.num_cells());
    const TabularPolicy b = random_table(rng, env.num_cells());
    const double eps_a = 0.05 + 0.9 * rng.uniform01();
    const double eps_b = 0.05 + 0.9 * rng.uniform01();
    const EnumeratedDistribution p =
        enumerate_distribution(env, eps_table_density(a, eps_a), T);
    const EnumeratedDistribution q =
        enumerate_distribution(env, eps_table_density(b, eps_b), T);
    const Divergence kl = exact_kl(p, q);
    const double tv = exact_tv(p, q);
    if (kl.infinite) continue;
    worst = std::max(worst, -kl.value);                         // Gibbs
    worst = std::max(worst, tv - std::sqrt(0.5 * kl.value));    // Pinsker
    const Divergence self = exact_kl(p, p);
    worst = std::max(worst, std::abs(self.value));
  }
  check.lhs = worst;
  check.rhs = 1e-10;
  check.pass = worst <= 1e-10;
  check.detail = "max violation of KL >= 0, KL(P,P) = 0, TV <= sqrt(KL/2)";
  return check;
}

OracleCheck check_mc_vs_enumeration(int n_reps, uint64_t seed) {
  OracleCheck check;
  check.name = "mc-vs-enumeration";
  GridWorldEnv env = oracle_grid(0.1);
  env.horizon = 3;
  const Supervisor sup = make_scripted_supervisor(env);
  const PolicyParams sup_policy = supervisor_as_policy(sup);
  TabularPolicy robot = std::get<TabularPolicy>(sup_policy);
  robot.actions[0] = (robot.actions[0] + 1) % 4;
  robot.actions[4] = (robot.actions[4] + 2) % 4;
  const LossSpec loss{LossKind::ZeroOne, std::nullopt};
  const double eps = 0.3;
  const EnumeratedDistribution dist = enumerate_distribution(
      env, eps_greedy_action_density(sup, eps), env.horizon);
  const double exact =
      enumerated_expected_loss(dist, robot, sup_policy, loss);
  const Environment env_v = env;
  int hits = 0;
  const Rng base((seed));
  for (int rep = 0; rep < n_reps; ++rep) {
    const MeanStderr mc = expected_loss(
        env_v, noisy_supervisor_act_fn(sup, EpsGreedyNoise{eps}), robot,
        sup_policy, loss, 500, base.stream(static_cast<uint64_t>(rep)));
    if (std::abs(mc.mean - exact) < 3.0 * mc.stderr_) ++hits;
  }
  check.lhs = hits;
  check.rhs = 99;
  check.pass = hits >= 99;
  std::ostringstream detail;
  detail << hits << "/" << n_reps << " repetitions within 3 stderr of exact "
         << exact;
  check.detail = detail.str();
  return check;
}

OracleCheck check_kl_stepwise_decomposition(int n_pairs, uint64_t seed) {
  OracleCheck check;
  check.name = "kl-stepwise-decomposition";
  double worst = 0.0;
  const Rng base((seed));
  const int T = 3;
  for (int s = 0; s < n_pairs; ++s) {
    Rng rng = base.stream(static_cast<uint64_t>(s));
    const GridWorldEnv env = oracle_grid(s % 2 == 0 ? 0.1 : 0.0);
    const TabularPolicy a = random_table(rng, env.num_cells());
    const TabularPolicy b = random_table(rng, env.num_cells());
    const ActionDensityFn da =
        eps_table_density(a, 0.05 + 0.9 * rng.uniform01());
    const ActionDensityFn db =
        eps_table_density(b, 0.05 + 0.9 * rng.uniform01());
    const EnumeratedDistribution p = enumerate_distribution(env, da, T);
    const EnumeratedDistribution q = enumerate_distribution(env, db, T);
    const Divergence direct = exact_kl(p, q);
    const Divergence stepwise = stepwise_log_ratio_expectation(p, da, db);
    if (direct.infinite != stepwise.infinite) {
      worst = kInf;
      continue;
    }
    if (!direct.infinite)
      worst = std::max(worst, std::abs(direct.value - stepwise.value));
  }
  check.lhs = worst;
  check.rhs = 1e-9;
  check.pass = worst <= 1e-9;
  check.detail = "max |trajectory KL - stepwise policy log-ratio form|";
  return check;
}

OracleReport run_oracle_suite(uint64_t seed) {
  OracleReport report;
  report.checks.push_back(
      check_gaussian_mle_closed_form(50, 1e-5, mix_seed(seed, 1)));
  report.checks.push_back(check_eps_mle_grid(50, 1e-4, mix_seed(seed, 2)));
  report.checks.push_back(
      check_shrink_trace_identity(100, 1e-9, mix_seed(seed, 3)));
  report.checks.push_back(
      check_gaussian_deviation_mc(5, 10000, 0.02, mix_seed(seed, 4)));
  report.checks.push_back(check_shift_bound_sweep(1000, mix_seed(seed, 5)));
  report.checks.push_back(check_tv_bound_sweep(1000, mix_seed(seed, 6)));
  report.checks.push_back(check_noise_kl_cases(mix_seed(seed, 7)));
  report.checks.push_back(check_kl_properties(60, mix_seed(seed, 8)));
  report.checks.push_back(check_mc_vs_enumeration(100, mix_seed(seed, 9)));
  report.checks.push_back(
      check_kl_stepwise_decomposition(20, mix_seed(seed, 10)));
  for (const OracleCheck& check : report.checks)
    report.all_pass = report.all_pass && check.pass;
  return report;
}

std::string oracle_report_to_text(const OracleReport& report) {
  std::ostringstream out;
  for (const OracleCheck& check : report.checks) {
    out << (check.pass ? "[PASS] " : "[FAIL] ") << check.name
        << "  lhs=" << format_double(check.lhs)
        << " rhs=" << format_double(check.rhs);
    if (!check.detail.empty()) out << "  (" << check.detail << ")";
    out << '\n';
  }
  out << (report.all_pass ? "all checks passed" : "SOME CHECKS FAILED")
      << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Wishart ablation.

AblationResult wishart_ablation(const ExperimentConfig& config,
                                const RunOptions& options) {
  validate_config(config);
  if (!env_is_continuous(config.env))
    throw ConfigError("the Wishart ablation needs a continuous environment");
  const AlgorithmConfig* dart_cfg = nullptr;
  const AlgorithmConfig* bc_cfg = nullptr;
  for (const AlgorithmConfig& cfg : config.algorithms) {
    if (cfg.kind == AlgorithmKind::Dart && !dart_cfg) dart_cfg = &cfg;
    if (cfg.kind == AlgorithmKind::BehaviorCloning && !bc_cfg) bc_cfg = &cfg;
  }
  if (!dart_cfg || !bc_cfg)
    throw ConfigError(
        "the ablation config needs one dart and one bc algorithm entry");

  const std::vector<uint64_t>& seeds =
      options.seed_override.empty() ? config.seeds : options.seed_override;
  const Supervisor sup = make_supervisor(config);
  auto make_ctx = [&](uint64_t seed) {
    return RunContext{config.env,
                      sup,
                      config.learner,
                      default_loss(config.env),
                      config.eval_rollouts,
                      config.subsample_per_trajectory,
                      seed};
  };

  auto final_eval = [](const RunTrace& trace) -> const EvalRecord& {
    const auto& last = trace.iterations.back();
    if (!last.eval)
      throw ConfigError(
          "the ablation needs an eval checkpoint at the final iteration");
    return *last.eval;
  };

  AblationResult ablation;
  std::vector<MetricRow> rows;
  std::vector<double> dart_shift, matched_shift;
  std::vector<double> bc_rewards, high_rewards;
  std::vector<double> matched_traces(seeds.size(), 0.0);

  // Behavior Cloning, then DART (whose converged noise trace sets the
  // matched target per seed), then the three Wishart levels.
  for (size_t i = 0; i < seeds.size(); ++i) {
    const RunTrace trace = run_algorithm(make_ctx(seeds[i]), *bc_cfg);
    auto r = trace_to_rows(*bc_cfg, seeds[i], trace);
    rows.insert(rows.end(), r.begin(), r.end());
    for (const IterationRecord& rec : trace.iterations)
      bc_rewards.push_back(rec.collection_reward_mean);
  }
  for (size_t i = 0; i < seeds.size(); ++i) {
    const RunTrace trace = run_algorithm(make_ctx(seeds[i]), *dart_cfg);
    auto r = trace_to_rows(*dart_cfg, seeds[i], trace);
    rows.insert(rows.end(), r.begin(), r.end());
    dart_shift.push_back(final_eval(trace).shift);
    matched_traces[i] =
        noise_magnitude(trace.iterations.back().psi_used);
  }
  const struct Level {
    const char* name;
    double factor;
  } levels[] = {{"wishart-low", 0.01}, {"wishart-matched", 1.0},
                {"wishart-high", 100.0}};
  for (const Level& level : levels) {
    for (size_t i = 0; i < seeds.size(); ++i) {
      AlgorithmConfig wcfg = *dart_cfg;
      wcfg.kind = AlgorithmKind::Wishart;
      wcfg.name = level.name;
      wcfg.initial_noise.reset();
      wcfg.wishart_target_trace = matched_traces[i] * level.factor;
      const RunTrace trace = run_algorithm(make_ctx(seeds[i]), wcfg);
      auto r = trace_to_rows(wcfg, seeds[i], trace);
      rows.insert(rows.end(), r.begin(), r.end());
      if (std::string(level.name) == "wishart-matched")
        matched_shift.push_back(final_eval(trace).shift);
      if (std::string(level.name) == "wishart-high")
        for (const IterationRecord& rec : trace.iterations)
          high_rewards.push_back(rec.collection_reward_mean);
    }
  }

  ablation.dart_mean_shift = mean_of(dart_shift);
  ablation.dart_shift_sd = sample_sd(dart_shift);
  ablation.matched_mean_shift = mean_of(matched_shift);
  ablation.bc_mean_collection_reward = mean_of(bc_rewards);
  ablation.high_mean_collection_reward = mean_of(high_rewards);
  ablation.matched_within_band =
      std::abs(ablation.matched_mean_shift - ablation.dart_mean_shift) <=
      2.0 * ablation.dart_shift_sd + 1e-12;
  ablation.high_reward_below_bc =
      ablation.high_mean_collection_reward <
      ablation.bc_mean_collection_reward;

  ExperimentResult result;
  result.experiment = config.experiment + "-ablation";
  result.rows = std::move(rows);
  result.results_csv = rows_to_csv(result.experiment, result.rows);
  if (options.write_artifacts) {
    const fs::path out_dir = resolve_output_dir(config, options);
    fs::create_directories(out_dir);
    write_file((out_dir / "ablation_results.csv").string(),
               result.results_csv);
    std::ostringstream summary;
    summary << "quantity,value\n"
            << "dart_mean_shift," << format_double(ablation.dart_mean_shift)
            << "\ndart_shift_sd," << format_double(ablation.dart_shift_sd)
            << "\nmatched_mean_shift,"
            << format_double(ablation.matched_mean_shift)
            << "\nbc_mean_collection_reward,"
            << format_double(ablation.bc_mean_collection_reward)
            << "\nhigh_mean_collection_reward,"
            << format_double(ablation.high_mean_collection_reward)
            << "\nmatched_within_band,"
            << (ablation.matched_within_band ? 1 : 0)
            << "\nhigh_reward_below_bc,"
            << (ablation.high_reward_below_bc ? 1 : 0) << '\n';
    write_file((out_dir / "ablation_summary.csv").string(), summary.str());
    result.output_dir = out_dir.string();
  }
  ablation.result = std::move(result);
  return ablation;
}

}  // namespace dart
