#include "empc/config.hpp"

#include <set>

namespace empc {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      std::string expected;
      for (const auto& k : allowed) {
        if (!expected.empty()) expected += ", ";
        expected += k;
      }
      throw ConfigError("unknown key \"" + where + it.key() + "\" (expected one of: " +
                        expected + ")");
    }
  }
}

double get_number(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.at(key).is_number()) {
    throw ConfigError("key \"" + where + key + "\" must be a number");
  }
  return obj.at(key).get<double>();
}

int get_int(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.at(key).is_number_integer()) {
    throw ConfigError("key \"" + where + key + "\" must be an integer");
  }
  return obj.at(key).get<int>();
}

std::string get_string(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.at(key).is_string()) {
    throw ConfigError("key \"" + where + key + "\" must be a string");
  }
  return obj.at(key).get<std::string>();
}

Vec get_vec(const json& obj, const std::string& key, const std::string& where) {
  const json& arr = obj.at(key);
  if (!arr.is_array() || arr.empty()) {
    throw ConfigError("key \"" + where + key + "\" must be a non-empty array of numbers");
  }
  Vec v(static_cast<Eigen::Index>(arr.size()));
  Eigen::Index i = 0;
  for (const auto& e : arr) {
    if (!e.is_number()) {
      throw ConfigError("key \"" + where + key + "\" must contain only numbers");
    }
    v[i++] = e.get<double>();
  }
  return v;
}

std::vector<int> get_int_list(const json& obj, const std::string& key,
                              const std::string& where) {
  const json& arr = obj.at(key);
  if (!arr.is_array() || arr.empty()) {
    throw ConfigError("key \"" + where + key + "\" must be a non-empty array of integers");
  }
  std::vector<int> out;
  for (const auto& e : arr) {
    if (!e.is_number_integer()) {
      throw ConfigError("key \"" + where + key + "\" must contain only integers");
    }
    out.push_back(e.get<int>());
  }
  return out;
}

void parse_model(const json& node, ExperimentConfig& cfg) {
  if (node.is_string()) {
    cfg.model_name = node.get<std::string>();
  } else if (node.is_object()) {
    reject_unknown(node,
                   {"name", "state_lower", "state_upper", "control_lower", "control_upper"},
                   "model.");
    if (!node.contains("name")) throw ConfigError("key \"model.name\" is required");
    cfg.model_name = get_string(node, "name", "model.");
    if (node.contains("state_lower")) cfg.overrides.state_lower = get_vec(node, "state_lower", "model.");
    if (node.contains("state_upper")) cfg.overrides.state_upper = get_vec(node, "state_upper", "model.");
    if (node.contains("control_lower")) cfg.overrides.control_lower = get_vec(node, "control_lower", "model.");
    if (node.contains("control_upper")) cfg.overrides.control_upper = get_vec(node, "control_upper", "model.");
  } else {
    throw ConfigError("key \"model\" must be a model name or an object");
  }
  bool known = false;
  for (const auto& m : list_models()) known = known || m.name == cfg.model_name;
  if (!known) {
    throw ConfigError("unknown model \"" + cfg.model_name +
                      "\" (registry: lq, lq-wide, nonlinear)");
  }
}

void parse_grid(const json& node, ExperimentConfig& cfg) {
  if (!node.is_object()) throw ConfigError("key \"grid\" must be an object");
  reject_unknown(node, {"state_nodes", "control_nodes"}, "grid.");
  if (node.contains("state_nodes")) cfg.state_nodes = get_int_list(node, "state_nodes", "grid.");
  if (node.contains("control_nodes")) {
    cfg.control_nodes = get_int_list(node, "control_nodes", "grid.");
  }
  for (int n : cfg.state_nodes) {
    if (n < 3) throw ConfigError("grid.state_nodes entries must be at least 3 nodes");
  }
  for (int n : cfg.control_nodes) {
    if (n < 3) throw ConfigError("grid.control_nodes entries must be at least 3 nodes");
  }
}

void parse_solver(const json& node, ExperimentConfig& cfg) {
  if (!node.is_object()) throw ConfigError("key \"solver\" must be an object");
  reject_unknown(node, {"tol", "max_iter", "seed_slope", "feasible_threshold"}, "solver.");
  if (node.contains("tol")) {
    cfg.solver.tol = get_number(node, "tol", "solver.");
    if (!(cfg.solver.tol > 0.0)) throw ConfigError("solver.tol must be positive");
  }
  if (node.contains("max_iter")) {
    cfg.solver.max_iter = get_int(node, "max_iter", "solver.");
    if (cfg.solver.max_iter < 1) throw ConfigError("solver.max_iter must be positive");
  }
  if (node.contains("seed_slope")) {
    cfg.solver.seed_slope = get_number(node, "seed_slope", "solver.");
    if (!(cfg.solver.seed_slope > 0.0)) throw ConfigError("solver.seed_slope must be positive");
  }
  if (node.contains("feasible_threshold")) {
    cfg.solver.feasible_threshold = get_number(node, "feasible_threshold", "solver.");
    if (!(cfg.solver.feasible_threshold > 0.0)) {
      throw ConfigError("solver.feasible_threshold must be positive");
    }
  }
}

void parse_penalty(const json& node, ExperimentConfig& cfg) {
  if (node.is_string()) {
    if (node.get<std::string>() != "auto") {
      throw ConfigError("key \"penalty\" must be \"auto\" or a positive number");
    }
    cfg.solver.penalty.auto_mode = true;
  } else if (node.is_number()) {
    const double p = node.get<double>();
    if (!(p > 0.0)) throw ConfigError("key \"penalty\" must be \"auto\" or a positive number");
    cfg.solver.penalty.auto_mode = false;
    cfg.solver.penalty.value = p;
  } else {
    throw ConfigError("key \"penalty\" must be \"auto\" or a positive number");
  }
}

const std::set<std::string>& experiment_keys(const std::string& kind) {
  static const std::set<std::string> solve = {"kind", "direction", "relaxed", "p"};
  static const std::set<std::string> certify = {"kind",  "lambda", "check",
                                                "rho",   "gamma",  "lambda2"};
  static const std::set<std::string> mpc = {"kind",    "terminal",           "r",
                                            "horizon", "n_max",              "profile",
                                            "radius",  "stabilizing_horizon"};
  static const std::set<std::string> travel = {"kind", "a", "b", "steps", "relaxed", "p"};
  static const std::set<std::string> figure = {"kind", "n"};
  if (kind == "solve") return solve;
  if (kind == "certify") return certify;
  if (kind == "mpc") return mpc;
  if (kind == "travel") return travel;
  if (kind == "figure") return figure;
  throw ConfigError("unknown experiment kind \"" + kind +
                    "\" (expected one of: solve, certify, mpc, travel, figure)");
}

void parse_experiments(const json& node, ExperimentConfig& cfg) {
  if (!node.is_array()) throw ConfigError("key \"experiments\" must be an array");
  for (const auto& e : node) {
    if (!e.is_object() || !e.contains("kind")) {
      throw ConfigError("each experiment must be an object with a \"kind\" key");
    }
    ExperimentSpec spec;
    spec.kind = get_string(e, "kind", "experiments[].");
    reject_unknown(e, experiment_keys(spec.kind), "experiments[]." + spec.kind + ".");
    spec.params = e;
    cfg.experiments.push_back(std::move(spec));
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("configuration must be a JSON object");
  reject_unknown(root, {"model", "grid", "solver", "penalty", "experiments", "output_dir"},
                 "");
  ExperimentConfig cfg;
  if (!root.contains("model")) throw ConfigError("key \"model\" is required");
  parse_model(root.at("model"), cfg);
  if (root.contains("grid")) parse_grid(root.at("grid"), cfg);
  if (root.contains("solver")) parse_solver(root.at("solver"), cfg);
  if (root.contains("penalty")) parse_penalty(root.at("penalty"), cfg);
  if (root.contains("experiments")) parse_experiments(root.at("experiments"), cfg);
  if (root.contains("output_dir")) cfg.output_dir = get_string(root, "output_dir", "");
  return cfg;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  json j;
  json model;
  model["name"] = cfg.model_name;
  auto put_vec = [&model](const char* key, const std::optional<Vec>& v) {
    if (v) model[key] = std::vector<double>(v->data(), v->data() + v->size());
  };
  put_vec("state_lower", cfg.overrides.state_lower);
  put_vec("state_upper", cfg.overrides.state_upper);
  put_vec("control_lower", cfg.overrides.control_lower);
  put_vec("control_upper", cfg.overrides.control_upper);
  j["model"] = model;
  if (!cfg.state_nodes.empty() || !cfg.control_nodes.empty()) {
    json grid;
    if (!cfg.state_nodes.empty()) grid["state_nodes"] = cfg.state_nodes;
    if (!cfg.control_nodes.empty()) grid["control_nodes"] = cfg.control_nodes;
    j["grid"] = grid;
  }
  json solver;
  solver["tol"] = cfg.solver.tol;
  solver["max_iter"] = cfg.solver.max_iter;
  solver["seed_slope"] = cfg.solver.seed_slope;
  solver["feasible_threshold"] = cfg.solver.feasible_threshold;
  j["solver"] = solver;
  if (cfg.solver.penalty.auto_mode) {
    j["penalty"] = "auto";
  } else {
    j["penalty"] = cfg.solver.penalty.value;
  }
  json exps = json::array();
  for (const auto& e : cfg.experiments) exps.push_back(e.params);
  j["experiments"] = exps;
  j["output_dir"] = cfg.output_dir;
  return j;
}

}  // namespace empc
