#ifndef EAPTOP_H
#define EAPTOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum EapStatus {
  EAP_STATUS_OK = 0,
  EAP_STATUS_NULL_POINTER = 1,
  EAP_STATUS_INVALID_UTF8 = 2,
  EAP_STATUS_CONFIG = 3,
  EAP_STATUS_INVALID_PARAMETER = 4,
  EAP_STATUS_MESH = 5,
  EAP_STATUS_NON_CONVERGENCE = 6,
  EAP_STATUS_LINEAR_SOLVER = 7,
  EAP_STATUS_IO = 8,
  EAP_STATUS_OUT_OF_RANGE = 9,
  EAP_STATUS_PANIC = 10,
} EapStatus;

/**
 * Opaque run configuration.
 */
typedef struct EapConfig EapConfig;

/**
 * Opaque result of a finished optimization run.
 */
typedef struct EapRun EapRun;

/**
 * Final values of a run.
 */
typedef struct EapSummary {
  /**
   * 1 when stopped by the convergence rule, 0 at the iteration cap.
   */
  int32_t converged;
  size_t iterations;
  /**
   * Output port displacement, mm.
   */
  double g0;
  double g1;
  double g2;
  double v1;
  double v2;
} EapSummary;

/**
 * One row of the iteration history.
 */
typedef struct EapHistoryRow {
  size_t iteration;
  double g0;
  double g0_hat;
  double g0_bar;
  double g1;
  double g2;
  double beta;
  double alpha;
  double a_d;
  size_t newton_iters;
  double wall_time_s;
} EapHistoryRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *eap_last_error_message(void);

/**
 * Default configuration (200x200 design mesh, vertical actuator).
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum EapStatus eap_config_new(struct EapConfig **out);

/**
 * Configuration parsed from TOML text; absent keys take their defaults.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for writes.
 */
enum EapStatus eap_config_from_toml(const char *text, struct EapConfig **out);

/**
 * # Safety
 * `config` must come from this library and not be used afterwards.
 */
void eap_config_free(struct EapConfig *config);

/**
 * Design mesh resolution.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum EapStatus eap_config_set_design_mesh(struct EapConfig *config, size_t nx, size_t ny);

/**
 * Iteration cap.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum EapStatus eap_config_set_max_iters(struct EapConfig *config, size_t max_iters);

/**
 * 0 optimizes the vertical, 1 the horizontal port displacement.
 *
 * # Safety
 * `config` must be a live handle.
 */
enum EapStatus eap_config_set_direction(struct EapConfig *config, int32_t direction);

/**
 * Runs the optimization to convergence or the iteration cap.
 *
 * # Safety
 * `config` must be a live handle and `out` valid for writes.
 */
enum EapStatus eap_run(const struct EapConfig *config, struct EapRun **out);

/**
 * # Safety
 * `run` must come from [`eap_run`] and not be used afterwards.
 */
void eap_run_free(struct EapRun *run);

/**
 * # Safety
 * `run` must be a live handle and `out` valid for writes.
 */
enum EapStatus eap_run_summary(const struct EapRun *run, struct EapSummary *out);

/**
 * Number of rows in the iteration history.
 *
 * # Safety
 * `run` must be a live handle and `len` valid for writes.
 */
enum EapStatus eap_run_history_len(const struct EapRun *run, size_t *len);

/**
 * # Safety
 * `run` must be a live handle and `out` valid for writes.
 */
enum EapStatus eap_run_history_row(const struct EapRun *run,
                                   size_t index,
                                   struct EapHistoryRow *out);

/**
 * Copies the final raw design variables of field 1 or 2 into `buf`, which
 * must hold exactly the number of design elements (see `len` on
 * `EAP_STATUS_OUT_OF_RANGE`, which is always written).
 *
 * # Safety
 * `run` must be a live handle; `buf` must be valid for `capacity` doubles.
 */
enum EapStatus eap_run_design(const struct EapRun *run,
                              int32_t field,
                              double *buf,
                              size_t capacity,
                              size_t *len);

/**
 * Writes VTK, CSV history and summary files into `dir`.
 *
 * # Safety
 * `run` must be a live handle and `dir` a NUL-terminated path.
 */
enum EapStatus eap_run_write_outputs(const struct EapRun *run, const char *dir);

/**
 * Runs the built-in self-checks; `failed` receives the number of failures.
 *
 * # Safety
 * `failed` must be valid for writes.
 */
enum EapStatus eap_verify(size_t *failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EAPTOP_H */
