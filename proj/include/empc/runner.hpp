#pragma once

#include <string>
#include <vector>

#include "empc/config.hpp"

namespace empc {

struct RunOptions {
  std::string output_dir;  // overrides the config's output_dir when non-empty
  bool strict = false;     // escalate certificate failures to exit code 3
  int threads = 0;         // 0: keep current setting
};

struct RunResult {
  int exit_code = 0;  // 0 ok, 2 solver non-convergence, 3 certificate (strict), 4 I/O
  std::string manifest_json;
  std::vector<std::string> files;
};

RunResult run(const ExperimentConfig& cfg, const RunOptions& opts);

std::string models_json();

inline constexpr const char* kVersion = "0.1.0";

}  // namespace empc
