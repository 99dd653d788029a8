#ifndef STATIONKEEP_H
#define STATIONKEEP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Bumped whenever a signature or struct layout changes.
 */
#define SK_ABI_VERSION 1

typedef enum SkStatus {
  SK_STATUS_OK = 0,
  SK_STATUS_NULL_POINTER = 1,
  SK_STATUS_INVALID_ARGUMENT = 2,
  SK_STATUS_CONFIG_ERROR = 3,
  SK_STATUS_NOT_RESET = 4,
  SK_STATUS_STEP_AFTER_DONE = 5,
  SK_STATUS_BUFFER_TOO_SMALL = 6,
  SK_STATUS_RUNTIME = 7,
  SK_STATUS_PANIC = 8,
} SkStatus;

/**
 * Opaque environment handle.
 */
typedef struct SkEnv SkEnv;

/**
 * Per-step scalars returned next to the observation.
 */
typedef struct SkStepInfo {
  double reward;
  uint8_t terminated;
  uint8_t truncated;
  /**
   * Set when any action component was outside [-1, 1] and was clipped.
   */
  uint8_t clipped;
  /**
   * 0 while running, then 1 time limit, 2 resources, 3 physics.
   */
  uint8_t termination;
  uint32_t strides;
  double tw50;
  double distance_km;
  double sand_used_kg;
  double helium_used_mol;
} SkStepInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

uint32_t sk_abi_version(void);

/**
 * NUL-terminated core crate version, the same string CLI manifests record.
 */
const char *sk_core_version(void);

size_t sk_observation_len(void);

size_t sk_action_len(void);

/**
 * Creates an environment from a TOML run configuration. `config_toml` may
 * be NULL for defaults. On success `*out` receives the handle.
 *
 * # Safety
 * `config_toml` must be NULL or a NUL-terminated string; `out` must be a
 * valid pointer to writable storage for one handle.
 */
enum SkStatus sk_env_new(const char *config_toml, struct SkEnv **out);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `env` must be NULL or a handle from [`sk_env_new`] not yet freed.
 */
void sk_env_free(struct SkEnv *env);

/**
 * Starts an episode and writes the first observation.
 *
 * # Safety
 * `env` must be a live handle; `obs` must point to `obs_len` writable doubles.
 */
enum SkStatus sk_env_reset(struct SkEnv *env, uint64_t seed, double *obs, size_t obs_len);

/**
 * Advances one stride with a policy-space action in [-1, 1]^3. Components
 * outside the box are clipped and `info.clipped` is set; non-finite
 * components are rejected.
 *
 * # Safety
 * `env` must be a live handle; `action` must point to `action_len` doubles;
 * `obs` to `obs_len` writable doubles; `info` to one writable [`SkStepInfo`].
 */
enum SkStatus sk_env_step(struct SkEnv *env,
                          const double *action,
                          size_t action_len,
                          double *obs,
                          size_t obs_len,
                          struct SkStepInfo *info);

/**
 * Copies the last error message of this thread into `buf` (truncated and
 * always NUL-terminated when `len > 0`). Returns the full message length
 * excluding the terminator, so a caller can size a second attempt.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t sk_last_error(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STATIONKEEP_H */
