// Exercises the shared-library C interface end to end.
#include <cassert>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "empc.h"

namespace fs = std::filesystem;

static int failures = 0;

#define EXPECT(cond)                                                    \
  do {                                                                  \
    if (!(cond)) {                                                      \
      std::printf("FAILED %s:%d: %s\n", __FILE__, __LINE__, #cond);     \
      failures += 1;                                                    \
    }                                                                   \
  } while (0)

int main() {
  EXPECT(std::strlen(empc_version()) > 0);

  char* models = empc_models_json();
  EXPECT(models != nullptr);
  if (models) {
    EXPECT(std::strstr(models, "\"lq\"") != nullptr);
    EXPECT(std::strstr(models, "\"nonlinear\"") != nullptr);
    empc_string_free(models);
  }

  // Invalid configurations surface as EMPC_ERR_CONFIG with a message.
  empc_session* bad = nullptr;
  EXPECT(empc_session_create("{ not json", &bad) == EMPC_ERR_CONFIG);
  EXPECT(bad != nullptr);
  EXPECT(std::strlen(empc_session_error(bad)) > 0);
  empc_session_destroy(bad);

  empc_session* unknown_key = nullptr;
  EXPECT(empc_session_create(R"({"model": "lq", "solvr": {}})", &unknown_key) ==
         EMPC_ERR_CONFIG);
  EXPECT(std::strstr(empc_session_error(unknown_key), "solvr") != nullptr);
  empc_session_destroy(unknown_key);

  EXPECT(empc_session_create(nullptr, &bad) == EMPC_ERR_ARGUMENT);
  empc_session_destroy(bad);

  // A small solve through the shared library.
  const fs::path out = fs::temp_directory_path() / "empc_capi_test";
  fs::remove_all(out);
  const std::string config = R"({
    "model": "lq",
    "grid": {"state_nodes": [41], "control_nodes": [21]},
    "experiments": [{"kind": "solve", "direction": "forward"}]
  })";
  empc_session* session = nullptr;
  EXPECT(empc_session_create(config.c_str(), &session) == EMPC_OK);
  EXPECT(empc_session_set_threads(session, 0) == EMPC_ERR_ARGUMENT);
  EXPECT(empc_session_set_threads(session, 1) == EMPC_OK);
  int exit_code = -1;
  EXPECT(empc_session_run(session, out.string().c_str(), 0, &exit_code) == EMPC_OK);
  EXPECT(exit_code == 0);
  const char* manifest = empc_session_manifest(session);
  EXPECT(std::strstr(manifest, "\"files\"") != nullptr);
  EXPECT(std::strstr(manifest, "v_plus.csv") != nullptr);
  EXPECT(fs::exists(out / "v_plus.csv"));
  EXPECT(fs::exists(out / "manifest.json"));
  {
    std::ifstream in(out / "v_plus.csv");
    std::string header;
    std::getline(in, header);
    EXPECT(header == "x1,value,feasible,u1");
  }
  empc_session_destroy(session);
  empc_session_destroy(nullptr);  // must be safe

  // A starved iteration budget surfaces as the solver exit code.
  const std::string starved = R"({
    "model": "lq",
    "grid": {"state_nodes": [41], "control_nodes": [21]},
    "solver": {"max_iter": 1},
    "experiments": [{"kind": "solve", "direction": "forward"}]
  })";
  empc_session* s2 = nullptr;
  EXPECT(empc_session_create(starved.c_str(), &s2) == EMPC_OK);
  int starved_code = -1;
  EXPECT(empc_session_run(s2, out.string().c_str(), 0, &starved_code) == EMPC_ERR_SOLVER);
  EXPECT(starved_code == 2);
  empc_session_destroy(s2);

  fs::remove_all(out);
  if (failures == 0) std::printf("test_capi: all checks passed\n");
  return failures == 0 ? 0 : 1;
}
