#ifndef SAFENAV_H
#define SAFENAV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SnStatus {
  SN_STATUS_OK = 0,
  SN_STATUS_NULL_POINTER = 1,
  SN_STATUS_INVALID_ARGUMENT = 2,
  SN_STATUS_INVALID_CONFIG = 3,
  SN_STATUS_INVALID_WEIGHTS = 4,
  SN_STATUS_IO = 5,
  SN_STATUS_GENERATION = 6,
  SN_STATUS_PANIC = 7,
} SnStatus;

typedef enum SnLayout {
  SN_LAYOUT_SQUARE = 0,
  SN_LAYOUT_LINE = 1,
} SnLayout;

typedef enum SnControllerKind {
  SN_CONTROLLER_KIND_MDD1 = 0,
  SN_CONTROLLER_KIND_DCBF = 1,
} SnControllerKind;

typedef enum SnOutcome {
  SN_OUTCOME_SUCCESS = 0,
  SN_OUTCOME_COLLISION = 1,
  SN_OUTCOME_TIMEOUT = 2,
  SN_OUTCOME_SOLVER_ABORT = 3,
} SnOutcome;

typedef enum SnStepStatus {
  SN_STEP_STATUS_OPTIMAL = 0,
  SN_STEP_STATUS_DEGRADED = 1,
  SN_STEP_STATUS_SOLVER_FAILURE = 2,
  SN_STEP_STATUS_INFEASIBLE_START = 3,
} SnStepStatus;

/**
 * Controller with its configuration and warm start.
 */
typedef struct SnController SnController;

/**
 * Generated or loaded scenario.
 */
typedef struct SnScenario SnScenario;

/**
 * Loaded planner weights.
 */
typedef struct SnWeights SnWeights;

typedef struct SnPose {
  double x;
  double y;
  double theta;
} SnPose;

typedef struct SnState {
  double x;
  double y;
  double v;
  double theta;
} SnState;

typedef struct SnControl {
  double a;
  double delta;
} SnControl;

typedef struct SnCircle {
  double cx;
  double cy;
  double r;
} SnCircle;

typedef struct SnEpisodeSummary {
  enum SnOutcome outcome;
  size_t steps;
  /**
   * Smallest audited obstacle distance over the episode (m).
   */
  double min_distance;
  /**
   * Steps whose solve was not applied.
   */
  size_t failures;
} SnEpisodeSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length, or 0 if there is none.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t sn_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sn_version(void);

/**
 * Length of the shortest Dubins path between two poses.
 *
 * # Safety
 * `out_length` must be null or valid for writes.
 */
enum SnStatus sn_dubins_length(struct SnPose q0,
                               struct SnPose q1,
                               double r_min,
                               double *out_length);

/**
 * Advances the bicycle model one step.
 *
 * # Safety
 * `config_toml` must be null or a NUL-terminated string; `out_state` must be null or valid for writes.
 */
enum SnStatus sn_bicycle_step(struct SnState state,
                              struct SnControl control,
                              const char *config_toml,
                              struct SnState *out_state);

/**
 * Generates a seeded scenario with the default generator settings.
 *
 * # Safety
 * `out_scenario` must be null or valid for writes.
 */
enum SnStatus sn_scenario_generate(uint64_t seed,
                                   enum SnLayout layout,
                                   struct SnScenario **out_scenario);

/**
 * Parses a scenario from its JSON text.
 *
 * # Safety
 * `json` must be null or NUL-terminated; `out_scenario` must be null or valid for writes.
 */
enum SnStatus sn_scenario_from_json(const char *json, struct SnScenario **out_scenario);

/**
 * Start pose, goal pose and obstacle count of a scenario.
 *
 * # Safety
 * `sc` must be a live handle; out pointers must be null or valid for writes.
 */
enum SnStatus sn_scenario_info(const struct SnScenario *sc,
                               struct SnPose *out_start,
                               struct SnPose *out_goal,
                               size_t *out_obstacles);

/**
 * Copies up to `len` obstacles into `buf`; `out_written` receives the count copied.
 *
 * # Safety
 * `sc` must be a live handle; `buf` must hold `len` elements.
 */
enum SnStatus sn_scenario_obstacles(const struct SnScenario *sc,
                                    struct SnCircle *buf,
                                    size_t len,
                                    size_t *out_written);

/**
 * # Safety
 * `sc` must be null or a handle not yet freed.
 */
void sn_scenario_free(struct SnScenario *sc);

/**
 * Loads planner weights from a file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out_weights` must be null or valid for writes.
 */
enum SnStatus sn_weights_load(const char *path, struct SnWeights **out_weights);

/**
 * # Safety
 * `w` must be null or a handle not yet freed.
 */
void sn_weights_free(struct SnWeights *w);

/**
 * Runs one closed-loop episode. `weights` null selects the fallback planner.
 *
 * # Safety
 * Handles must be live; `config_toml` null or NUL-terminated; `out_summary` valid for writes.
 */
enum SnStatus sn_episode_run(const struct SnScenario *sc,
                             const struct SnWeights *weights,
                             enum SnControllerKind kind,
                             const char *config_toml,
                             struct SnEpisodeSummary *out_summary);

/**
 * Creates a controller. `config_toml` null means defaults.
 *
 * # Safety
 * `config_toml` null or NUL-terminated; `out_controller` null or valid for writes.
 */
enum SnStatus sn_controller_new(enum SnControllerKind kind,
                                const char *config_toml,
                                struct SnController **out_controller);

/**
 * Horizon length N; the reference passed to `sn_controller_step` needs N + 1 states.
 *
 * # Safety
 * `ctrl` must be a live handle.
 */
size_t sn_controller_horizon(const struct SnController *ctrl);

/**
 * One receding-horizon step. Writes the control to apply and the step status.
 *
 * # Safety
 * `ctrl` live; `reference` holds `n_reference` states; `obstacles` holds `n_obstacles` circles.
 */
enum SnStatus sn_controller_step(struct SnController *ctrl,
                                 struct SnState state,
                                 const struct SnState *reference,
                                 size_t n_reference,
                                 const struct SnCircle *obstacles,
                                 size_t n_obstacles,
                                 struct SnControl *out_control,
                                 enum SnStepStatus *out_status);

/**
 * Drops the warm start so the next step solves from scratch.
 *
 * # Safety
 * `ctrl` must be a live handle.
 */
enum SnStatus sn_controller_reset(struct SnController *ctrl);

/**
 * # Safety
 * `ctrl` must be null or a handle not yet freed.
 */
void sn_controller_free(struct SnController *ctrl);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SAFENAV_H */
