#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "empc/dp.hpp"
#include "empc/model.hpp"

namespace empc {

struct ExperimentSpec {
  std::string kind;  // solve | certify | mpc | travel | figure
  nlohmann::json params;
};

struct ExperimentConfig {
  std::string model_name;
  ModelOverrides overrides;
  std::vector<int> state_nodes;    // empty: per-model defaults
  std::vector<int> control_nodes;  // empty: per-model defaults
  SolveConfig solver;
  std::vector<ExperimentSpec> experiments;
  std::string output_dir = "out";
};

// Parses and fully validates a JSON configuration document. Unknown keys are
// rejected; errors name the offending key and the expected type.
ExperimentConfig parse_config(const std::string& text);

nlohmann::json config_to_json(const ExperimentConfig& cfg);

}  // namespace empc
