#include "dart/config.hpp"

#include <set>

#include "dart/serialize.hpp"

namespace dart {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

const json& require(const json& j, const char* key, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing");
  return *it;
}

Mat parse_mat(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "must be a non-empty matrix");
  const int rows = static_cast<int>(j.size());
  if (!j.front().is_array()) fail(path, "must be an array of rows");
  const int cols = static_cast<int>(j.front().size());
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols) fail(path, "ragged rows");
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Vec parse_vec(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "must be a non-empty array");
  Vec v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

Environment parse_env(const json& j) {
  const std::string type =
      require(j, "type", "environment").get<std::string>();
  if (type == "pointmass") {
    LinearPointMassEnv env;
    env.A = parse_mat(require(j, "A", "environment"), "environment.A");
    env.B = parse_mat(require(j, "B", "environment"), "environment.B");
    env.process_noise_std =
        require(j, "process_noise_std", "environment").get<double>();
    env.x0_mean = parse_vec(require(j, "x0_mean", "environment"),
                            "environment.x0_mean");
    env.x0_std =
        parse_vec(require(j, "x0_std", "environment"), "environment.x0_std");
    env.Q = parse_mat(require(j, "Q", "environment"), "environment.Q");
    env.R = parse_mat(require(j, "R", "environment"), "environment.R");
    env.horizon = require(j, "horizon", "environment").get<int>();
    return env;
  }
  if (type == "gridworld") {
    GridWorldEnv env;
    env.width = require(j, "width", "environment").get<int>();
    env.height = require(j, "height", "environment").get<int>();
    const json& goal = require(j, "goal", "environment");
    if (!goal.is_array() || goal.size() != 2)
      fail("environment.goal", "must be [x, y]");
    env.goal_x = goal[0].get<int>();
    env.goal_y = goal[1].get<int>();
    env.slip = require(j, "slip", "environment").get<double>();
    env.horizon = require(j, "horizon", "environment").get<int>();
    if (j.contains("start") && !j["start"].is_null()) {
      const json& start = j["start"];
      if (!start.is_array() || start.size() != 2)
        fail("environment.start", "must be [x, y] or null");
      env.start = std::make_pair(start[0].get<int>(), start[1].get<int>());
    }
    return env;
  }
  fail("environment.type", "must be 'pointmass' or 'gridworld'");
}

json env_to_json(const Environment& env) {
  json j;
  if (const auto* pm = std::get_if<LinearPointMassEnv>(&env)) {
    j["type"] = "pointmass";
    json a = json::array();
    auto mat_json = [](const Mat& m) {
      json rows = json::array();
      for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
      }
      return rows;
    };
    auto vec_json = [](const Vec& v) {
      json out = json::array();
      for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
      return out;
    };
    j["A"] = mat_json(pm->A);
    j["B"] = mat_json(pm->B);
    j["process_noise_std"] = pm->process_noise_std;
    j["x0_mean"] = vec_json(pm->x0_mean);
    j["x0_std"] = vec_json(pm->x0_std);
    j["Q"] = mat_json(pm->Q);
    j["R"] = mat_json(pm->R);
    j["horizon"] = pm->horizon;
    return j;
  }
  const auto& gw = std::get<GridWorldEnv>(env);
  j["type"] = "gridworld";
  j["width"] = gw.width;
  j["height"] = gw.height;
  j["goal"] = json::array({gw.goal_x, gw.goal_y});
  j["slip"] = gw.slip;
  j["horizon"] = gw.horizon;
  j["start"] = gw.start ? json(json::array({gw.start->first,
                                            gw.start->second}))
                        : json(nullptr);
  return j;
}

LearnerSpec parse_learner(const json& j) {
  const std::string type = require(j, "type", "learner").get<std::string>();
  if (type == "ridge") {
    RidgeSpec spec;
    spec.lambda = j.value("lambda", 0.0);
    spec.use_bias = j.value("use_bias", true);
    if (j.contains("features") && !j["features"].is_null()) {
      const json& feat = j["features"];
      if (feat.contains("selected") && !feat["selected"].is_null())
        spec.features.selected = feat["selected"].get<std::vector<int>>();
      if (feat.contains("clip_abs") && !feat["clip_abs"].is_null())
        spec.features.clip_abs = feat["clip_abs"].get<double>();
    }
    return spec;
  }
  if (type == "tabular") {
    TabularMajoritySpec spec;
    spec.default_action = j.value("default_action", 0);
    return spec;
  }
  fail("learner.type", "must be 'ridge' or 'tabular'");
}

json learner_to_json(const LearnerSpec& learner) {
  json j;
  if (const auto* ridge = std::get_if<RidgeSpec>(&learner)) {
    j["type"] = "ridge";
    j["lambda"] = ridge->lambda;
    j["use_bias"] = ridge->use_bias;
    json feat;
    feat["selected"] = ridge->features.selected;
    feat["clip_abs"] = ridge->features.clip_abs
                           ? json(*ridge->features.clip_abs)
                           : json(nullptr);
    j["features"] = std::move(feat);
    return j;
  }
  j["type"] = "tabular";
  j["default_action"] =
      std::get<TabularMajoritySpec>(learner).default_action;
  return j;
}

AlgorithmKind parse_kind(const std::string& kind, const std::string& path) {
  if (kind == "bc" || kind == "behavior-cloning")
    return AlgorithmKind::BehaviorCloning;
  if (kind == "dart") return AlgorithmKind::Dart;
  if (kind == "dagger") return AlgorithmKind::DAgger;
  if (kind == "isotropic") return AlgorithmKind::Isotropic;
  if (kind == "wishart") return AlgorithmKind::Wishart;
  fail(path, "unknown algorithm kind '" + kind +
                 "' (expected bc, dart, dagger, isotropic or wishart)");
}

std::string kind_to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::BehaviorCloning: return "bc";
    case AlgorithmKind::Dart: return "dart";
    case AlgorithmKind::DAgger: return "dagger";
    case AlgorithmKind::Isotropic: return "isotropic";
    case AlgorithmKind::Wishart: return "wishart";
  }
  throw ConfigError("unknown algorithm kind");
}

AlgorithmConfig parse_algorithm(const json& j, size_t index) {
  const std::string path = "algorithms[" + std::to_string(index) + "]";
  AlgorithmConfig cfg;
  cfg.kind =
      parse_kind(require(j, "kind", path).get<std::string>(), path + ".kind");
  cfg.name = j.value("name", kind_to_string(cfg.kind));
  cfg.iterations = require(j, "iterations", path).get<int>();
  const json& demos = require(j, "demos_per_iteration", path);
  if (demos.is_number_integer()) {
    cfg.demos_per_iteration = {demos.get<int>()};
  } else if (demos.is_array()) {
    cfg.demos_per_iteration = demos.get<std::vector<int>>();
  } else {
    fail(path + ".demos_per_iteration", "must be an int or an int array");
  }
  if (j.contains("alpha") && !j["alpha"].is_null()) {
    const json& a = j["alpha"];
    const std::string kind =
        require(a, "kind", path + ".alpha").get<std::string>();
    if (kind == "trace-of-estimate") {
      cfg.alpha.kind = AlphaSpec::Kind::TraceOfEstimate;
    } else if (kind == "absolute") {
      cfg.alpha.kind = AlphaSpec::Kind::Absolute;
      cfg.alpha.value = require(a, "value", path + ".alpha").get<double>();
    } else if (kind == "multiplier-of-first") {
      cfg.alpha.kind = AlphaSpec::Kind::MultiplierOfFirst;
      cfg.alpha.value = require(a, "value", path + ".alpha").get<double>();
    } else {
      fail(path + ".alpha.kind",
           "must be trace-of-estimate, absolute or multiplier-of-first");
    }
  }
  if (j.contains("initial_noise") && !j["initial_noise"].is_null())
    cfg.initial_noise = noise_from_json(j["initial_noise"]);
  cfg.dagger_beta = j.value("dagger_beta", 0.5);
  cfg.isotropic_scale = j.value("isotropic_scale", 1.0);
  if (j.contains("wishart_target_trace") &&
      !j["wishart_target_trace"].is_null())
    cfg.wishart_target_trace = j["wishart_target_trace"].get<double>();
  if (j.contains("retrain_iterations") && !j["retrain_iterations"].is_null())
    cfg.retrain_iterations =
        j["retrain_iterations"].get<std::vector<int>>();
  if (j.contains("eval_iterations") && !j["eval_iterations"].is_null())
    cfg.eval_iterations = j["eval_iterations"].get<std::vector<int>>();
  return cfg;
}

json algorithm_to_json(const AlgorithmConfig& cfg) {
  json j;
  j["kind"] = kind_to_string(cfg.kind);
  j["name"] = cfg.name;
  j["iterations"] = cfg.iterations;
  if (cfg.demos_per_iteration.size() == 1)
    j["demos_per_iteration"] = cfg.demos_per_iteration.front();
  else
    j["demos_per_iteration"] = cfg.demos_per_iteration;
  json a;
  switch (cfg.alpha.kind) {
    case AlphaSpec::Kind::TraceOfEstimate:
      a["kind"] = "trace-of-estimate";
      break;
    case AlphaSpec::Kind::Absolute:
      a["kind"] = "absolute";
      a["value"] = cfg.alpha.value;
      break;
    case AlphaSpec::Kind::MultiplierOfFirst:
      a["kind"] = "multiplier-of-first";
      a["value"] = cfg.alpha.value;
      break;
  }
  j["alpha"] = std::move(a);
  j["initial_noise"] = cfg.initial_noise
                           ? noise_to_json(*cfg.initial_noise)
                           : json(nullptr);
  j["dagger_beta"] = cfg.dagger_beta;
  j["isotropic_scale"] = cfg.isotropic_scale;
  j["wishart_target_trace"] = cfg.wishart_target_trace
                                  ? json(*cfg.wishart_target_trace)
                                  : json(nullptr);
  j["retrain_iterations"] =
      cfg.retrain_iterations ? json(*cfg.retrain_iterations) : json(nullptr);
  j["eval_iterations"] = cfg.eval_iterations.empty()
                             ? json(nullptr)
                             : json(cfg.eval_iterations);
  return j;
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig config;
  config.experiment = require(j, "experiment", "").get<std::string>();
  config.env = parse_env(require(j, "environment", ""));
  config.supervisor_kind =
      require(require(j, "supervisor", ""), "type", "supervisor")
          .get<std::string>();
  config.learner = parse_learner(require(j, "learner", ""));
  const json& algos = require(j, "algorithms", "");
  if (!algos.is_array() || algos.empty())
    fail("algorithms", "must be a non-empty array");
  for (size_t i = 0; i < algos.size(); ++i)
    config.algorithms.push_back(parse_algorithm(algos[i], i));
  config.seeds = require(j, "seeds", "").get<std::vector<uint64_t>>();
  config.eval_rollouts = j.value("eval_rollouts", 100);
  if (j.contains("subsample_per_trajectory") &&
      !j["subsample_per_trajectory"].is_null())
    config.subsample_per_trajectory =
        j["subsample_per_trajectory"].get<int>();
  config.output_dir = j.value("output_dir", "");
  validate_config(config);
  return config;
}

nlohmann::json config_to_json(const ExperimentConfig& config) {
  json j;
  j["experiment"] = config.experiment;
  j["environment"] = env_to_json(config.env);
  j["supervisor"] = json{{"type", config.supervisor_kind}};
  j["learner"] = learner_to_json(config.learner);
  json algos = json::array();
  for (const AlgorithmConfig& cfg : config.algorithms)
    algos.push_back(algorithm_to_json(cfg));
  j["algorithms"] = std::move(algos);
  j["seeds"] = config.seeds;
  j["eval_rollouts"] = config.eval_rollouts;
  j["subsample_per_trajectory"] =
      config.subsample_per_trajectory
          ? json(*config.subsample_per_trajectory)
          : json(nullptr);
  j["output_dir"] = config.output_dir;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path + ": " + e.what());
  }
  return config_from_json(j);
}

void validate_config(const ExperimentConfig& config) {
  if (config.experiment.empty()) fail("experiment", "must be non-empty");
  validate_env(config.env);
  const bool continuous = env_is_continuous(config.env);
  if (config.supervisor_kind == "lqr") {
    if (!continuous)
      fail("supervisor.type", "lqr requires a pointmass environment");
  } else if (config.supervisor_kind == "scripted") {
    if (continuous)
      fail("supervisor.type", "scripted requires a gridworld environment");
  } else {
    fail("supervisor.type", "must be 'lqr' or 'scripted'");
  }
  if (continuous != std::holds_alternative<RidgeSpec>(config.learner))
    fail("learner.type",
         continuous ? "pointmass requires the ridge learner"
                    : "gridworld requires the tabular learner");
  if (config.seeds.empty()) fail("seeds", "need at least one seed");
  if (config.eval_rollouts < 1) fail("eval_rollouts", "must be >= 1");
  if (config.subsample_per_trajectory && *config.subsample_per_trajectory < 1)
    fail("subsample_per_trajectory", "must be >= 1");
  std::set<std::string> names;
  for (size_t i = 0; i < config.algorithms.size(); ++i) {
    const AlgorithmConfig& cfg = config.algorithms[i];
    const std::string path = "algorithms[" + std::to_string(i) + "]";
    if (cfg.name.empty()) fail(path + ".name", "must be non-empty");
    if (!names.insert(cfg.name).second)
      fail(path + ".name", "duplicate algorithm name '" + cfg.name + "'");
    if (cfg.iterations < 1) fail(path + ".iterations", "must be >= 1");
    for (int n : cfg.demos_per_iteration)
      if (n < 1) fail(path + ".demos_per_iteration", "entries must be >= 1");
    if (cfg.demos_per_iteration.size() != 1 &&
        static_cast<int>(cfg.demos_per_iteration.size()) != cfg.iterations)
      fail(path + ".demos_per_iteration",
           "must be scalar or have one entry per iteration");
    if (!(cfg.dagger_beta >= 0.0 && cfg.dagger_beta <= 1.0))
      fail(path + ".dagger_beta", "must lie in [0, 1]");
    if (cfg.alpha.kind != AlphaSpec::Kind::TraceOfEstimate &&
        cfg.alpha.value < 0)
      fail(path + ".alpha.value", "must be >= 0");
    if (cfg.initial_noise) {
      const bool gaussian =
          std::holds_alternative<GaussianNoise>(*cfg.initial_noise);
      if (gaussian != continuous)
        fail(path + ".initial_noise",
             "noise family must match the environment's control space");
      validate_noise(*cfg.initial_noise);
    }
    if ((cfg.kind == AlgorithmKind::Isotropic ||
         cfg.kind == AlgorithmKind::Wishart) &&
        !continuous)
      fail(path + ".kind", "isotropic/wishart need a continuous environment");
    for (int k : cfg.eval_iterations)
      if (k < 1 || k > cfg.iterations)
        fail(path + ".eval_iterations", "entries must lie in 1..iterations");
    if (cfg.retrain_iterations)
      for (int k : *cfg.retrain_iterations)
        if (k < 1 || k > cfg.iterations)
          fail(path + ".retrain_iterations",
               "entries must lie in 1..iterations");
  }
}

Supervisor make_supervisor(const ExperimentConfig& config) {
  if (config.supervisor_kind == "lqr")
    return make_lqr_supervisor(std::get<LinearPointMassEnv>(config.env));
  return make_scripted_supervisor(std::get<GridWorldEnv>(config.env));
}

LossSpec default_loss(const Environment& env) {
  if (env_is_continuous(env))
    return LossSpec{LossKind::SquaredL2, std::nullopt};
  return LossSpec{LossKind::ZeroOne, std::nullopt};
}

ExperimentConfig preset_config(const std::string& name) {
  if (name == "pointmass-compare") {
    LinearPointMassEnv env;
    env.A = (Mat(2, 2) << 1.0, 0.1, 0.0, 1.0).finished();
    env.B = (Mat(2, 2) << 0.005, 0.0, 0.0, 0.1).finished();
    env.process_noise_std = 0.01;
    env.x0_mean = (Vec(2) << 0.0, 0.0).finished();
    env.x0_std = (Vec(2) << 1.0, 1.0).finished();
    env.Q = Mat::Identity(2, 2);
    env.R = Mat::Identity(2, 2);
    env.horizon = 25;

    RidgeSpec learner;
    learner.lambda = 1e-6;
    learner.use_bias = true;
    learner.features.selected = {0};  // position only: imperfect on purpose

    ExperimentConfig config;
    config.experiment = "pointmass-compare";
    config.env = env;
    config.supervisor_kind = "lqr";
    config.learner = learner;
    config.eval_rollouts = 200;
    for (uint64_t s = 0; s < 20; ++s) config.seeds.push_back(s);

    AlgorithmConfig bc;
    bc.kind = AlgorithmKind::BehaviorCloning;
    bc.name = "bc";
    bc.iterations = 4;
    bc.demos_per_iteration = {5};
    config.algorithms.push_back(bc);

    AlgorithmConfig dart = bc;
    dart.kind = AlgorithmKind::Dart;
    dart.name = "dart";
    config.algorithms.push_back(dart);

    AlgorithmConfig dagger = bc;
    dagger.kind = AlgorithmKind::DAgger;
    dagger.name = "dagger";
    dagger.dagger_beta = 0.5;
    config.algorithms.push_back(dagger);

    AlgorithmConfig iso = bc;
    iso.kind = AlgorithmKind::Isotropic;
    iso.name = "isotropic";
    iso.isotropic_scale = 1.0;
    config.algorithms.push_back(iso);
    validate_config(config);
    return config;
  }
  if (name == "grid-compare") {
    GridWorldEnv env;
    env.width = 5;
    env.height = 5;
    env.goal_x = 4;
    env.goal_y = 0;  // default action (up) moves away from this goal
    env.slip = 0.1;
    env.horizon = 14;
    env.start = std::make_pair(0, 4);  // fixed start: drift actually hurts

    ExperimentConfig config;
    config.experiment = "grid-compare";
    config.env = env;
    config.supervisor_kind = "scripted";
    config.learner = TabularMajoritySpec{0};
    config.eval_rollouts = 300;
    for (uint64_t s = 0; s < 10; ++s) config.seeds.push_back(s);

    AlgorithmConfig bc;
    bc.kind = AlgorithmKind::BehaviorCloning;
    bc.name = "bc";
    bc.iterations = 6;
    bc.demos_per_iteration = {3};
    config.algorithms.push_back(bc);

    AlgorithmConfig dart = bc;
    dart.kind = AlgorithmKind::Dart;
    dart.name = "dart";
    config.algorithms.push_back(dart);

    AlgorithmConfig dagger = bc;
    dagger.kind = AlgorithmKind::DAgger;
    dagger.name = "dagger";
    dagger.dagger_beta = 0.5;
    config.algorithms.push_back(dagger);
    validate_config(config);
    return config;
  }
  throw ConfigError("unknown preset '" + name + "' (available: " +
                    [] {
                      std::string out;
                      for (const std::string& n : preset_names()) {
                        if (!out.empty()) out += ", ";
                        out += n;
                      }
                      return out;
                    }() +
                    ")");
}

std::vector<std::string> preset_names() {
  return {"pointmass-compare", "grid-compare"};
}

}  // namespace dart
