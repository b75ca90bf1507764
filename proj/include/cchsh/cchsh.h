/* cchsh - C API for the curved-spacetime correlation pipeline.
 *
 * Everything runs through an opaque session: load one JSON config, apply
 * optional overrides, execute a command, then read the report and tables or
 * write them to disk. All returned strings are owned by the session and
 * stay valid until the next cchsh_run / cchsh_load_* call on it (or until
 * the session is freed). Sessions are not thread-safe; use one per thread.
 */

#ifndef CCHSH_H_
#define CCHSH_H_

#include <stdint.h>

#if defined(_WIN32)
#define CCHSH_API __declspec(dllexport)
#else
#define CCHSH_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct cchsh_session cchsh_session;

/* Status values double as process exit codes:
 *   0 success, 2 config or io, 3 geometry construction, 4 dynamics
 *   sampling, 5 inverse solving, 6 worldview analysis, 7 sweep failure
 *   budget, 1 anything internal. */
typedef enum cchsh_status {
  CCHSH_OK = 0,
  CCHSH_ERR_INTERNAL = 1,
  CCHSH_ERR_CONFIG = 2,
  CCHSH_ERR_GEOMETRY = 3,
  CCHSH_ERR_DYNAMICS = 4,
  CCHSH_ERR_INVERSE = 5,
  CCHSH_ERR_WORLDVIEWS = 6,
  CCHSH_ERR_SWEEP = 7
} cchsh_status;

CCHSH_API const char* cchsh_version(void);

CCHSH_API cchsh_session* cchsh_session_new(void);
CCHSH_API void cchsh_session_free(cchsh_session* session);

/* Loads and schema-checks a JSON config. Relative paths inside the config
 * resolve against the file's directory (or base_dir for text configs). */
CCHSH_API cchsh_status cchsh_load_config_file(cchsh_session* session, const char* path);
CCHSH_API cchsh_status cchsh_load_config_text(cchsh_session* session, const char* text,
                                              const char* base_dir);

/* Overrides on top of the loaded config; call between load and run. */
CCHSH_API cchsh_status cchsh_set_seed(cchsh_session* session, uint64_t seed);
CCHSH_API cchsh_status cchsh_set_threads(cchsh_session* session, int threads);
CCHSH_API cchsh_status cchsh_set_nodes(cchsh_session* session, int nodes);

/* Commands: validate, geometry, probabilities, inverse, sweep, worldviews. */
CCHSH_API cchsh_status cchsh_run(cchsh_session* session, const char* command);

/* Results of the last successful run. */
CCHSH_API const char* cchsh_report_json(const cchsh_session* session);
CCHSH_API const char* cchsh_summary(const cchsh_session* session);
CCHSH_API int cchsh_table_count(const cchsh_session* session);
CCHSH_API const char* cchsh_table_name(const cchsh_session* session, int index);
CCHSH_API const char* cchsh_table_csv(const cchsh_session* session, int index);

/* Writes report.json plus the CSV tables into the directory, creating it
 * when missing and honoring the config's output format flags. */
CCHSH_API cchsh_status cchsh_write_outputs(cchsh_session* session, const char* directory);

/* The config's output directory, for callers that pass no override. */
CCHSH_API const char* cchsh_output_directory(const cchsh_session* session);

/* Details of the last failing call: human message, config field path (may
 * be empty), stable error name, and a one-line JSON payload for stderr. */
CCHSH_API const char* cchsh_error_message(const cchsh_session* session);
CCHSH_API const char* cchsh_error_field(const cchsh_session* session);
CCHSH_API const char* cchsh_error_name(const cchsh_session* session);
CCHSH_API const char* cchsh_error_payload(const cchsh_session* session);

#ifdef __cplusplus
}
#endif

#endif /* CCHSH_H_ */
