#include "empc.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

#include "empc/runner.hpp"

struct empc_session {
  std::optional<empc::ExperimentConfig> config;
  std::string error;
  std::string manifest;
  int threads = 0;
  bool strict = false;
};

namespace {

empc_status classify(const std::exception& e, empc_session* s) {
  s->error = e.what();
  if (dynamic_cast<const empc::ConfigError*>(&e)) return EMPC_ERR_CONFIG;
  if (dynamic_cast<const empc::ContractViolation*>(&e)) return EMPC_ERR_ARGUMENT;
  return EMPC_ERR_INTERNAL;
}

}  // namespace

extern "C" {

empc_status empc_session_create(const char* config_json, empc_session** out) {
  if (!out) return EMPC_ERR_ARGUMENT;
  *out = nullptr;
  auto* session = new (std::nothrow) empc_session();
  if (!session) return EMPC_ERR_INTERNAL;
  *out = session;
  if (!config_json) {
    session->error = "config_json must not be NULL";
    return EMPC_ERR_ARGUMENT;
  }
  try {
    session->config = empc::parse_config(config_json);
    return EMPC_OK;
  } catch (const std::exception& e) {
    return classify(e, session);
  }
}

void empc_session_destroy(empc_session* session) { delete session; }

const char* empc_session_error(const empc_session* session) {
  return session ? session->error.c_str() : "session is NULL";
}

empc_status empc_session_set_threads(empc_session* session, int threads) {
  if (!session) return EMPC_ERR_ARGUMENT;
  if (threads < 1) {
    session->error = "thread count must be positive";
    return EMPC_ERR_ARGUMENT;
  }
  session->threads = threads;
  return EMPC_OK;
}

empc_status empc_session_run(empc_session* session, const char* output_dir, int strict_mode,
                             int* exit_code) {
  if (!session) return EMPC_ERR_ARGUMENT;
  if (!session->config) {
    session->error = "session has no valid configuration";
    return EMPC_ERR_CONFIG;
  }
  try {
    empc::RunOptions opts;
    if (output_dir) opts.output_dir = output_dir;
    opts.strict = strict_mode != 0;
    opts.threads = session->threads;
    empc::RunResult result = empc::run(*session->config, opts);
    session->manifest = result.manifest_json;
    if (exit_code) *exit_code = result.exit_code;
    session->error.clear();
    switch (result.exit_code) {
      case 0:
        return EMPC_OK;
      case 2:
        session->error = "a solver did not converge within max_iter";
        return EMPC_ERR_SOLVER;
      case 3:
        session->error = "a requested certificate failed (strict mode)";
        return EMPC_ERR_CERTIFICATE;
      case 4:
        session->error = "an output file could not be written";
        return EMPC_ERR_IO;
      default:
        return EMPC_ERR_INTERNAL;
    }
  } catch (const std::exception& e) {
    return classify(e, session);
  }
}

const char* empc_session_manifest(const empc_session* session) {
  return session ? session->manifest.c_str() : "";
}

char* empc_models_json(void) {
  try {
    const std::string json = empc::models_json();
    char* buf = static_cast<char*>(std::malloc(json.size() + 1));
    if (!buf) return nullptr;
    std::memcpy(buf, json.c_str(), json.size() + 1);
    return buf;
  } catch (...) {
    return nullptr;
  }
}

void empc_string_free(char* str) { std::free(str); }

const char* empc_version(void) { return empc::kVersion; }

}  // extern "C"
