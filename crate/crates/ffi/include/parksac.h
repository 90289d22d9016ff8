#ifndef PARKSAC_H
#define PARKSAC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every call.
typedef enum ParksacStatus {
  PARKSAC_STATUS_OK = 0,
  PARKSAC_STATUS_NULL_POINTER = 1,
  PARKSAC_STATUS_INVALID_ARGUMENT = 2,
  PARKSAC_STATUS_BUFFER_TOO_SMALL = 3,
  PARKSAC_STATUS_EPISODE_DONE = 4,
  PARKSAC_STATUS_NOT_RESET = 5,
  PARKSAC_STATUS_NO_PATH = 6,
  PARKSAC_STATUS_IO = 7,
  PARKSAC_STATUS_CORRUPT_FILE = 8,
  PARKSAC_STATUS_INTERNAL = 9,
} ParksacStatus;

// Opaque environment handle.
typedef struct ParksacEnv ParksacEnv;

// Opaque planned path.
typedef struct ParksacPath ParksacPath;

// Opaque policy handle.
typedef struct ParksacPolicy ParksacPolicy;

// Outcome of one environment step.
typedef struct ParksacStepResult {
  double reward;
  bool done;
  bool collision;
  bool success;
  bool timeout;
  double dist;
  double dtheta;
  uint64_t t;
} ParksacStepResult;

typedef struct ParksacPose {
  double x;
  double y;
  double theta;
} ParksacPose;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copy the calling thread's last error message into `buf` (NUL
// terminated, truncated to `len`). Returns the full message length.
uintptr_t parksac_last_error(char *buf, uintptr_t len);

// Create an environment on layout `make_scenario(kind, layout_seed)` with
// default settings. `kind` is "parallel", "perpendicular" or "mixed".
enum ParksacStatus parksac_env_new(const char *kind, uint64_t layout_seed, struct ParksacEnv **out);

void parksac_env_free(struct ParksacEnv *env);

// Length of the observation vector.
uintptr_t parksac_env_obs_dim(const struct ParksacEnv *env);

// Start an episode; writes the first observation into `obs` if non-null.
enum ParksacStatus parksac_env_reset(struct ParksacEnv *env,
                                     uint64_t episode_seed,
                                     double *obs,
                                     uintptr_t obs_len);

// Apply one control; writes the next observation and the step outcome.
enum ParksacStatus parksac_env_step(struct ParksacEnv *env,
                                    double steer,
                                    double throttle,
                                    double *obs,
                                    uintptr_t obs_len,
                                    struct ParksacStepResult *result);

// Current vehicle pose and speed.
enum ParksacStatus parksac_env_pose(const struct ParksacEnv *env,
                                    struct ParksacPose *pose,
                                    double *speed);

// Load the policy from a training checkpoint.
enum ParksacStatus parksac_policy_load(const char *path, struct ParksacPolicy **out);

void parksac_policy_free(struct ParksacPolicy *policy);

uintptr_t parksac_policy_obs_dim(const struct ParksacPolicy *policy);

// Deterministic action `bound * tanh(mean)` for one observation.
enum ParksacStatus parksac_policy_act(const struct ParksacPolicy *policy,
                                      const double *obs,
                                      uintptr_t obs_len,
                                      double *steer,
                                      double *throttle);

// Plan with default search settings from the environment's current pose
// to its goal, among its static obstacles.
enum ParksacStatus parksac_plan(const struct ParksacEnv *env, struct ParksacPath **out);

void parksac_path_free(struct ParksacPath *path);

// Number of poses, including the start.
uintptr_t parksac_path_len(const struct ParksacPath *path);

double parksac_path_cost(const struct ParksacPath *path);

// Pose `index` of the path; `reverse` is set when the primitive reaching
// it drove backwards.
enum ParksacStatus parksac_path_pose(const struct ParksacPath *path,
                                     uintptr_t index,
                                     struct ParksacPose *pose,
                                     bool *reverse);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARKSAC_H */
