/* C interface to the empc toolkit: grid dynamic programming for economic MPC
 * value functions, dissipativity certificates, and terminal-cost studies.
 *
 * Sessions are opaque; every call reports success through empc_status and
 * leaves a human-readable message retrievable via empc_session_error.
 */
#ifndef EMPC_H
#define EMPC_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct empc_session empc_session;

typedef enum {
  EMPC_OK = 0,
  EMPC_ERR_ARGUMENT = 1,
  EMPC_ERR_CONFIG = 2,
  EMPC_ERR_SOLVER = 3,
  EMPC_ERR_CERTIFICATE = 4,
  EMPC_ERR_IO = 5,
  EMPC_ERR_INTERNAL = 6
} empc_status;

/* Creates a session from a JSON configuration document. A session is always
 * returned (and must be destroyed); on EMPC_ERR_CONFIG it only carries the
 * error message. */
empc_status empc_session_create(const char* config_json, empc_session** out);

void empc_session_destroy(empc_session* session);

/* Last error message for the session; empty string when none. The pointer is
 * owned by the session and valid until the next call on it. */
const char* empc_session_error(const empc_session* session);

empc_status empc_session_set_threads(empc_session* session, int threads);

/* Executes the configured experiments. output_dir may be NULL to use the
 * configured directory. exit_code receives the CLI exit convention:
 * 0 ok, 2 solver non-convergence, 3 certificate failure (strict mode),
 * 4 I/O failure. */
empc_status empc_session_run(empc_session* session, const char* output_dir, int strict_mode,
                             int* exit_code);

/* Manifest of the last run as JSON; empty string before the first run. */
const char* empc_session_manifest(const empc_session* session);

/* Registered models as a JSON array. The returned buffer must be released
 * with empc_string_free. */
char* empc_models_json(void);

void empc_string_free(char* str);

const char* empc_version(void);

#ifdef __cplusplus
}
#endif

#endif /* EMPC_H */
