#include "dart/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace dart {

namespace {

using nlohmann::json;

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat mat_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j.front().is_array())
    throw ConfigError(std::string(what) + " must be an array of arrays");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j.front().size());
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(j[i].size()) != cols)
      throw ConfigError(std::string(what) + " has ragged rows");
    for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

json vec_to_json(const Vec& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vec vec_from_json(const json& j, const char* what) {
  if (!j.is_array())
    throw ConfigError(std::string(what) + " must be an array");
  Vec v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

json state_to_json(const State& s) {
  if (is_continuous_state(s)) return vec_to_json(state_vec(s));
  return state_index(s);
}

State state_from_json(const json& j) {
  if (j.is_number_integer()) return j.get<int>();
  return vec_from_json(j, "state");
}

json control_to_json(const Control& u) {
  if (is_continuous_control(u)) return vec_to_json(control_vec(u));
  return control_index(u);
}

Control control_from_json(const json& j) {
  if (j.is_number_integer()) return j.get<int>();
  return vec_from_json(j, "control");
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

nlohmann::json noise_to_json(const NoiseParam& psi) {
  json j;
  if (const auto* g = std::get_if<GaussianNoise>(&psi)) {
    j["type"] = "gaussian";
    j["sigma"] = mat_to_json(g->sigma);
  } else {
    j["type"] = "eps_greedy";
    j["eps"] = std::get<EpsGreedyNoise>(psi).eps;
  }
  return j;
}

NoiseParam noise_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "gaussian")
    return GaussianNoise{mat_from_json(j.at("sigma"), "noise.sigma")};
  if (type == "eps_greedy")
    return EpsGreedyNoise{j.at("eps").get<double>()};
  throw ConfigError("noise.type must be 'gaussian' or 'eps_greedy'");
}

nlohmann::json policy_to_json(const PolicyParams& policy) {
  json j;
  if (const auto* lin = std::get_if<LinearPolicy>(&policy)) {
    j["type"] = "linear";
    j["weights"] = mat_to_json(lin->weights);
    j["bias"] = vec_to_json(lin->bias);
    json feat;
    feat["selected"] = lin->features.selected;
    if (lin->features.clip_abs)
      feat["clip_abs"] = *lin->features.clip_abs;
    else
      feat["clip_abs"] = nullptr;
    j["features"] = std::move(feat);
    return j;
  }
  const auto& tab = std::get<TabularPolicy>(policy);
  j["type"] = "tabular";
  json actions = json::array();
  for (const auto& [state, action] : tab.actions)
    actions.push_back(json::array({state, action}));
  j["actions"] = std::move(actions);
  j["default_action"] = tab.default_action;
  return j;
}

PolicyParams policy_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "linear") {
    LinearPolicy lin;
    lin.weights = mat_from_json(j.at("weights"), "policy.weights");
    lin.bias = vec_from_json(j.at("bias"), "policy.bias");
    const json& feat = j.at("features");
    lin.features.selected = feat.at("selected").get<std::vector<int>>();
    if (!feat.at("clip_abs").is_null())
      lin.features.clip_abs = feat.at("clip_abs").get<double>();
    return lin;
  }
  if (type == "tabular") {
    TabularPolicy tab;
    tab.default_action = j.at("default_action").get<int>();
    for (const auto& pair : j.at("actions"))
      tab.actions[pair.at(0).get<int>()] = pair.at(1).get<int>();
    return tab;
  }
  throw ConfigError("policy.type must be 'linear' or 'tabular'");
}

std::string dataset_to_jsonl(const Dataset& dataset) {
  std::ostringstream out;
  json meta;
  meta["record"] = "meta";
  meta["env"] = dataset.meta.env_id;
  meta["horizon"] = dataset.meta.horizon;
  meta["master_seed"] = dataset.meta.master_seed;
  json history = json::array();
  for (const NoiseParam& psi : dataset.meta.noise_history)
    history.push_back(noise_to_json(psi));
  meta["noise_history"] = std::move(history);
  out << meta.dump() << '\n';
  for (const DataRecord& rec : dataset.records) {
    json j;
    j["iteration"] = rec.iteration;
    j["trajectory_id"] = rec.trajectory_id;
    j["t"] = rec.t;
    j["state"] = state_to_json(rec.state);
    j["label"] = control_to_json(rec.label);
    j["executed"] = control_to_json(rec.executed);
    out << j.dump() << '\n';
  }
  return out.str();
}

Dataset dataset_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  Dataset dataset;
  bool have_meta = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (!have_meta) {
      if (j.value("record", "") != "meta")
        throw DataError("dataset must start with a meta line");
      dataset.meta.env_id = j.at("env").get<std::string>();
      dataset.meta.horizon = j.at("horizon").get<int>();
      dataset.meta.master_seed = j.at("master_seed").get<uint64_t>();
      for (const auto& n : j.at("noise_history"))
        dataset.meta.noise_history.push_back(noise_from_json(n));
      have_meta = true;
      continue;
    }
    DataRecord rec;
    rec.iteration = j.at("iteration").get<int>();
    rec.trajectory_id = j.at("trajectory_id").get<int>();
    rec.t = j.at("t").get<int>();
    rec.state = state_from_json(j.at("state"));
    rec.label = control_from_json(j.at("label"));
    rec.executed = control_from_json(j.at("executed"));
    dataset.records.push_back(std::move(rec));
  }
  if (!have_meta) throw DataError("dataset text is empty");
  return dataset;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << contents;
  if (!out) throw DataError("failed to write: " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace dart
