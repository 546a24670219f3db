/*
 * raps.h - C interface to the raps cluster power and scheduling simulator.
 *
 * All objects are opaque handles created by raps_*_create/_load functions and
 * released with the matching _free function. Every fallible call returns a
 * raps_status; on failure raps_last_error() holds a message for the calling
 * thread. Strings handed out by the library are released with
 * raps_string_free().
 */
#ifndef RAPS_RAPS_H
#define RAPS_RAPS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RAPS_API __declspec(dllexport)
#else
#define RAPS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define RAPS_VERSION_STRING "1.0.0"

typedef enum raps_status {
  RAPS_OK = 0,
  RAPS_ERR_CONFIG = 1,
  RAPS_ERR_SCHEMA = 2,
  RAPS_ERR_RANGE = 3,
  RAPS_ERR_NON_INTEGER_RATIO = 4,
  RAPS_ERR_CAPACITY_VIOLATION = 5,
  RAPS_ERR_DUPLICATE_JOB = 6,
  RAPS_ERR_UNKNOWN_JOB = 7,
  RAPS_ERR_SCHEDULER_VIOLATION = 8,
  RAPS_ERR_STARVATION_GUARD = 9,
  RAPS_ERR_SESSION_STATE = 10,
  RAPS_ERR_PROTOCOL = 11,
  RAPS_ERR_IO = 12,
  RAPS_ERR_INVALID_ARGUMENT = 13,
  RAPS_ERR_INTERNAL = 14
} raps_status;

typedef struct raps_cluster raps_cluster;
typedef struct raps_workload raps_workload;
typedef struct raps_result raps_result;
typedef struct raps_session raps_session;

RAPS_API const char* raps_version(void);
RAPS_API const char* raps_status_name(raps_status status);
/* Message for the most recent failure on this thread ("" if none). */
RAPS_API const char* raps_last_error(void);
RAPS_API void raps_string_free(char* str);

/* Warnings (e.g. orphan telemetry rows) go to stderr unless a callback is
 * installed. level: 0 info, 1 warning, 2 error. Pass NULL to restore. */
typedef void (*raps_log_fn)(int level, const char* message, void* user);
RAPS_API void raps_set_log_callback(raps_log_fn fn, void* user);

/* ---- cluster ---------------------------------------------------------- */
RAPS_API raps_status raps_cluster_load(const char* path, raps_cluster** out);
RAPS_API raps_status raps_cluster_from_json(const char* json, raps_cluster** out);
RAPS_API size_t raps_cluster_node_count(const raps_cluster* cluster);
RAPS_API void raps_cluster_free(raps_cluster* cluster);

/* ---- workload --------------------------------------------------------- */
/* Reads <dir>/jobs.csv and every CSV under <dir>/telemetry. Series whose channels
 * disagree on sampling interval are resampled to delta_s. */
RAPS_API raps_status raps_workload_load_trace(const char* dir, double delta_s,
                                              raps_workload** out);
/* params_json: synthetic workload parameters. When has_seed is non-zero,
 * seed overrides the "seed" field. */
RAPS_API raps_status raps_workload_synth(const char* params_json, int has_seed, uint64_t seed,
                                         raps_workload** out);
RAPS_API raps_status raps_workload_write_trace(const raps_workload* workload, const char* dir);
RAPS_API size_t raps_workload_size(const raps_workload* workload);
RAPS_API void raps_workload_free(raps_workload* workload);

/* ---- simulation ------------------------------------------------------- */
/* config_json keys: mode, scheduler, delta_s, horizon_s, carbon_intensity,
 * starvation_cap_s, rated_power_w. base_dir resolves relative CSV paths and
 * may be NULL. */
RAPS_API raps_status raps_simulate(const raps_cluster* cluster, const raps_workload* workload,
                                   const char* config_json, const char* base_dir,
                                   raps_result** out);
RAPS_API raps_status raps_result_summary_json(const raps_result* result, char** out);
RAPS_API raps_status raps_result_history_csv(const raps_result* result, char** out);
RAPS_API raps_status raps_result_jobs_csv(const raps_result* result, char** out);
/* Writes summary.json, power_history.csv and jobs.csv into dir. */
RAPS_API raps_status raps_result_write(const raps_result* result, const char* dir);
RAPS_API void raps_result_free(raps_result* result);

/* ---- RL environment sessions ------------------------------------------ */
RAPS_API raps_status raps_session_create(const char* scenario_path, raps_session** out);
RAPS_API raps_status raps_session_create_from_json(const char* scenario_json,
                                                   const char* base_dir, raps_session** out);
/* Handles one request line; *reply is always set on RAPS_OK, including for
 * protocol-level errors (reply carries "ok": false). */
RAPS_API raps_status raps_session_handle(raps_session* session, const char* line, char** reply);
RAPS_API raps_status raps_session_spec_json(const raps_session* session, char** out);
RAPS_API int raps_session_closed(const raps_session* session);
RAPS_API void raps_session_free(raps_session* session);

/* ---- utilities -------------------------------------------------------- */
/* Lower-case hex SHA-256 of a file into out (65 bytes incl. terminator). */
RAPS_API raps_status raps_file_sha256(const char* path, char out[65]);

#ifdef __cplusplus
}
#endif

#endif /* RAPS_RAPS_H */
