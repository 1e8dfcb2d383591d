// Command-line front end for the empc shared library. All numerical work goes
// through the C API; this tool only assembles configuration JSON and reports
// results.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "empc.h"

namespace {

using nlohmann::json;

struct GlobalArgs {
  std::string config_path;
  std::string output_dir;
  bool strict = false;
  int threads = 0;
};

json load_config_json(const GlobalArgs& args) {
  if (args.config_path.empty()) return json::object();
  std::ifstream in(args.config_path);
  if (!in) {
    throw std::runtime_error("cannot open config file " + args.config_path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return json::parse(ss.str());
}

int run_session(const json& config, const GlobalArgs& args) {
  empc_session* session = nullptr;
  const std::string text = config.dump();
  empc_status st = empc_session_create(text.c_str(), &session);
  if (st != EMPC_OK) {
    std::cerr << "error: " << empc_session_error(session) << "\n";
    empc_session_destroy(session);
    return 1;
  }
  if (args.threads > 0) empc_session_set_threads(session, args.threads);
  int exit_code = 0;
  st = empc_session_run(session, args.output_dir.empty() ? nullptr : args.output_dir.c_str(),
                        args.strict ? 1 : 0, &exit_code);
  if (st != EMPC_OK && exit_code == 0) {
    std::cerr << "error: " << empc_session_error(session) << "\n";
    empc_session_destroy(session);
    return 1;
  }
  json manifest = json::parse(std::string(empc_session_manifest(session)));
  std::cout << "wrote " << manifest["files"].size() << " file(s)";
  if (!manifest["certificates"].empty()) {
    long passed = 0;
    for (const auto& [name, ok] : manifest["certificates"].items()) {
      passed += ok.get<bool>() ? 1 : 0;
    }
    std::cout << ", certificates " << passed << "/" << manifest["certificates"].size()
              << " passed";
  }
  std::cout << " (exit " << exit_code << ")\n";
  if (st != EMPC_OK) std::cerr << "warning: " << empc_session_error(session) << "\n";
  empc_session_destroy(session);
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grid dynamic programming toolkit for economic MPC studies"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalArgs args;
  app.add_option("--config", args.config_path, "JSON configuration file");
  app.add_option("--output", args.output_dir, "Output directory (overrides config)");
  app.add_flag("--strict", args.strict, "Exit 3 when a requested certificate fails");
  app.add_option("--threads", args.threads,
                 "Worker threads (default: EMPC_THREADS environment variable, else 1)");

  // solve
  auto* solve = app.add_subcommand("solve", "Solve a value function by value iteration");
  std::string model = "lq";
  std::string direction = "forward";
  bool relaxed = false;
  double penalty = 0.0;
  solve->add_option("--model", model, "Model name (see list-models)");
  solve->add_option("--direction", direction, "forward or backward");
  solve->add_flag("--relaxed", relaxed, "Solve the penalty-relaxed problem");
  solve->add_option("--p", penalty, "Relaxation penalty weight (default: calibrated)");

  // certify
  auto* certify = app.add_subcommand("certify", "Run a dissipativity certificate");
  std::string lambda = "v_ominus";
  std::string check = "plain";
  std::string lambda2 = "v_oplus";
  double rho = 1.0, gamma = 0.0;
  certify->add_option("--model", model, "Model name");
  certify->add_option("--lambda", lambda, "Storage function: zero|v_plus|v_minus|v_oplus|v_ominus");
  certify->add_option("--check", check, "plain, strict, or two_storage");
  certify->add_option("--lambda2", lambda2, "Second storage function (two_storage)");
  certify->add_option("--rho", rho, "Quadratic coefficient for strict checks");
  certify->add_option("--gamma", gamma, "Quadratic coefficient for two_storage gap");

  // mpc
  auto* mpc = app.add_subcommand("mpc", "Terminal-cost study: profiles, horizons, simulations");
  std::string terminal = "vf2";
  double r = 1.0;
  int n_max = 20;
  int horizon = 0;
  bool find_ns = false;
  mpc->add_option("--model", model, "Model name");
  mpc->add_option("--terminal", terminal,
                  "origin_indicator|v_plus|v_ominus|vf1|vf2|beta");
  mpc->add_option("--r", r, "Terminal cost parameter r");
  mpc->add_option("--n-max", n_max, "Largest horizon for profiles and the Ns search");
  mpc->add_option("--horizon", horizon, "Simulate the closed loop at this fixed horizon");
  mpc->add_flag("--stabilizing-horizon", find_ns, "Search for the minimum stabilizing horizon");

  // travel
  auto* travel = app.add_subcommand("travel", "Cost-to-travel between two states");
  std::vector<double> point_a, point_b;
  std::string steps = "inf";
  bool travel_relaxed = false;
  travel->add_option("--model", model, "Model name");
  travel->add_option("--a", point_a, "Start state")->expected(-1);
  travel->add_option("--b", point_b, "Target state")->expected(-1);
  travel->add_option("--steps", steps, "Horizon length or \"inf\"");
  travel->add_flag("--relaxed", travel_relaxed, "Use the penalty-relaxed cost-to-travel");
  travel->add_option("--p", penalty, "Relaxation penalty weight");

  // figure
  auto* figure = app.add_subcommand("figure", "Reproduce a numerical study as data files");
  int figure_n = 1;
  figure->add_option("n", figure_n, "Study number: 1, 2, or 3")->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "Execute the experiment list from --config");

  // list-models
  auto* list_cmd = app.add_subcommand("list-models", "Print the model registry");

  CLI11_PARSE(app, argc, argv);

  try {
    if (list_cmd->parsed()) {
      char* models = empc_models_json();
      if (!models) {
        std::cerr << "error: could not enumerate models\n";
        return 1;
      }
      json arr = json::parse(std::string(models));
      empc_string_free(models);
      for (const auto& m : arr) {
        std::cout << m["name"].get<std::string>() << ": state_dim=" << m["state_dim"]
                  << " control_dim=" << m["control_dim"] << " state_box=" << m["state_lower"]
                  << ".." << m["state_upper"] << " control_box=" << m["control_lower"] << ".."
                  << m["control_upper"] << "\n";
      }
      return 0;
    }

    json config = load_config_json(args);
    if (!config.contains("model")) config["model"] = model;
    auto set_experiment = [&config](json exp) {
      config["experiments"] = json::array({std::move(exp)});
    };

    if (solve->parsed()) {
      config["model"] = model;
      json exp{{"kind", "solve"}, {"direction", direction}, {"relaxed", relaxed}};
      if (relaxed && solve->count("--p")) exp["p"] = penalty;
      set_experiment(exp);
    } else if (certify->parsed()) {
      config["model"] = model;
      json exp{{"kind", "certify"}, {"lambda", lambda}, {"check", check}};
      if (check == "strict") exp["rho"] = rho;
      if (check == "two_storage") {
        exp["lambda2"] = lambda2;
        exp["gamma"] = gamma;
      }
      set_experiment(exp);
    } else if (mpc->parsed()) {
      config["model"] = model;
      json exp{{"kind", "mpc"}, {"terminal", terminal}, {"r", r}, {"n_max", n_max}};
      if (find_ns) exp["stabilizing_horizon"] = true;
      if (horizon > 0) exp["horizon"] = horizon;
      set_experiment(exp);
    } else if (travel->parsed()) {
      config["model"] = model;
      json exp{{"kind", "travel"}, {"relaxed", travel_relaxed}};
      if (!point_a.empty()) exp["a"] = point_a;
      if (!point_b.empty()) exp["b"] = point_b;
      if (steps != "inf") exp["steps"] = std::stoi(steps);
      if (travel->count("--p")) exp["p"] = penalty;
      set_experiment(exp);
    } else if (figure->parsed()) {
      set_experiment(json{{"kind", "figure"}, {"n", figure_n}});
    } else if (run_cmd->parsed()) {
      if (args.config_path.empty()) {
        std::cerr << "error: run requires --config\n";
        return 1;
      }
    }
    return run_session(config, args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
