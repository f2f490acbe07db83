#ifndef SELFSYNC_H
#define SELFSYNC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum SsStatus {
  SS_STATUS_OK = 0,
  SS_STATUS_NULL_POINTER = 1,
  SS_STATUS_INVALID_ARGUMENT = 2,
  SS_STATUS_CONFIG_ERROR = 3,
  SS_STATUS_IO_ERROR = 4,
  SS_STATUS_SIMULATION_ERROR = 5,
  SS_STATUS_NO_SUCH_NODE = 6,
  SS_STATUS_PANIC = 7,
} SsStatus;

typedef enum SsActivity {
  SS_ACTIVITY_INACTIVE = 0,
  SS_ACTIVITY_ACTIVE = 1,
} SsActivity;

// Opaque run configuration.
typedef struct SsConfig SsConfig;

// Opaque simulation instance.
typedef struct SsSimulation SsSimulation;

// Observables of one period. Energies are cumulative per bucket.
typedef struct SsTraceRecord {
  uint64_t period;
  double mean_activity;
  double mean_battery;
  double sun;
  double cloud;
  double e_tx;
  double e_rx;
  double e_idle;
  double e_active;
  double e_app;
  uint64_t messages_sent;
  uint64_t messages_received;
} SsTraceRecord;

typedef struct SsNodeState {
  // Activation variable.
  double s;
  bool active;
  // False while the node is out of energy.
  bool alive;
  double battery;
} SsNodeState;

// Called with `user_data`, the node id and its new activity whenever a
// node's activity flips.
typedef void (*SsActivityCallback)(void *user_data, size_t node, enum SsActivity activity);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on this thread.
const char *ss_last_error(void);

// Library version as a static NUL-terminated string.
const char *ss_version(void);

// Create a configuration holding the defaults.
enum SsStatus ss_config_default(struct SsConfig **out);

// Load and validate a TOML configuration file.
enum SsStatus ss_config_load(const char *path, struct SsConfig **out);

// Apply one `key=value` override, e.g. `"network.p_loss=0.2"`. The
// configuration is unchanged if the result does not validate.
enum SsStatus ss_config_set(struct SsConfig *config, const char *assignment);

// Free a configuration. Null is ignored.
void ss_config_free(struct SsConfig *config);

// Create a simulation from a configuration. The configuration is copied
// and may be freed afterwards.
enum SsStatus ss_simulation_new(const struct SsConfig *config, struct SsSimulation **out);

// Advance one period. `record` may be null.
enum SsStatus ss_simulation_step(struct SsSimulation *sim, struct SsTraceRecord *record);

// Advance `periods` periods. When `records` is not null it must have room
// for `periods` entries.
enum SsStatus ss_simulation_run(struct SsSimulation *sim,
                                uint64_t periods,
                                struct SsTraceRecord *records);

// Index of the next period to run.
enum SsStatus ss_simulation_period(const struct SsSimulation *sim, uint64_t *out);

enum SsStatus ss_simulation_node_count(const struct SsSimulation *sim, size_t *out);

enum SsStatus ss_simulation_node_state(const struct SsSimulation *sim,
                                       size_t node,
                                       struct SsNodeState *out);

// Register `callback` for activity changes of `node`. The handle written
// to `out_handle` identifies the registration for
// [`ss_simulation_unregister_callback`].
enum SsStatus ss_simulation_register_callback(struct SsSimulation *sim,
                                              size_t node,
                                              SsActivityCallback callback,
                                              void *user_data,
                                              uint32_t *out_handle);

// Remove a registration. Unknown handles give
// [`SsStatus::InvalidArgument`].
enum SsStatus ss_simulation_unregister_callback(struct SsSimulation *sim,
                                                size_t node,
                                                uint32_t handle);

// Free a simulation. Null is ignored.
void ss_simulation_free(struct SsSimulation *sim);

// Battery-weighted ideal radius.
enum SsStatus ss_ideal_power(double battery, double p_min, double p_max, double *out);

// Nearest member of `levels` (strictly increasing, `n >= 1`).
enum SsStatus ss_snap_power(double p, const double *levels, size_t n, double *out);

// `tanh(g * (s + sum(activities)))`. `activities` may be null when `n` is 0.
enum SsStatus ss_update_state(double s, const double *activities, size_t n, double g, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SELFSYNC_H */
