#ifndef HTSTEP_H
#define HTSTEP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum HtstepStatus {
  HTSTEP_STATUS_OK = 0,
  HTSTEP_STATUS_NULL_POINTER = 1,
  HTSTEP_STATUS_INVALID_INPUT = 2,
  HTSTEP_STATUS_CONFIG = 3,
  HTSTEP_STATUS_NUMERICAL = 4,
  HTSTEP_STATUS_IO = 5,
  HTSTEP_STATUS_FORMAT = 6,
  HTSTEP_STATUS_BUFFER_TOO_SMALL = 7,
  HTSTEP_STATUS_PANIC = 8,
} HtstepStatus;

/**
 * A Fokker–Planck problem preset.
 */
typedef struct HtstepProblem HtstepProblem;

/**
 * An HT tensor.
 */
typedef struct HtstepTensor HtstepTensor;

/**
 * Summary of an [`htstep_integrate`] run.
 */
typedef struct HtstepRunStats {
  size_t steps;
  size_t max_rank;
  double final_mass;
  /**
   * Steps whose truncation error estimate exceeded its tolerance.
   */
  size_t threshold_violations;
} HtstepRunStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `cap`) and returns the full message length in bytes.
 */
size_t htstep_last_error(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *htstep_version(void);

/**
 * Builds the preset `name` (`fp2d-paper`, `fp4d-paper`) on an `n`-point
 * grid; `n = 0` selects the preset's default.
 */
enum HtstepStatus htstep_problem_preset(const char *name, size_t n, struct HtstepProblem **out);

void htstep_problem_free(struct HtstepProblem *p);

/**
 * Number of modes and grid points per mode.
 */
enum HtstepStatus htstep_problem_shape(const struct HtstepProblem *p, size_t *order, size_t *n);

/**
 * A copy of the problem's initial state.
 */
enum HtstepStatus htstep_problem_initial(const struct HtstepProblem *p, struct HtstepTensor **out);

/**
 * Compresses a dense tensor with absolute Frobenius tolerance `tol` on the
 * balanced tree.
 */
enum HtstepStatus htstep_tensor_from_dense(const double *data,
                                           const size_t *dims,
                                           size_t order,
                                           double tol,
                                           struct HtstepTensor **out);

/**
 * Truncates to absolute tolerance `tol`; `err_est` (may be null) receives
 * the error estimate.
 */
enum HtstepStatus htstep_tensor_truncate(const struct HtstepTensor *t,
                                         double tol,
                                         struct HtstepTensor **out,
                                         double *err_est);

/**
 * Truncates to rank at most `rank` at every node.
 */
enum HtstepStatus htstep_tensor_truncate_rank(const struct HtstepTensor *t,
                                              size_t rank,
                                              struct HtstepTensor **out,
                                              double *err_est);

void htstep_tensor_free(struct HtstepTensor *t);

/**
 * Number of modes, or 0 for a null handle.
 */
size_t htstep_tensor_order(const struct HtstepTensor *t);

/**
 * Frobenius norm, or NaN for a null handle.
 */
double htstep_tensor_norm(const struct HtstepTensor *t);

/**
 * Mode sizes. Pass `out = NULL, cap = 0` to query the count in `len`.
 */
enum HtstepStatus htstep_tensor_dims(const struct HtstepTensor *t,
                                     size_t *out,
                                     size_t cap,
                                     size_t *len);

/**
 * Node ranks in tree preorder (root first).
 */
enum HtstepStatus htstep_tensor_ranks(const struct HtstepTensor *t,
                                      size_t *out,
                                      size_t cap,
                                      size_t *len);

/**
 * Full tensor entries (column-major).
 */
enum HtstepStatus htstep_tensor_to_dense(const struct HtstepTensor *t,
                                         double *out,
                                         size_t cap,
                                         size_t *len);

enum HtstepStatus htstep_tensor_write(const struct HtstepTensor *t, const char *path);

enum HtstepStatus htstep_tensor_read(const char *path, struct HtstepTensor **out);

/**
 * Per-step tolerances `[ε_α, ε_β, ε_γ...]` of `scheme` at step `dt`.
 */
enum HtstepStatus htstep_threshold_schedule(const char *scheme,
                                            double dt,
                                            const double *constants,
                                            size_t n_constants,
                                            double *out,
                                            size_t cap,
                                            size_t *len);

/**
 * Integrates the problem from its initial state to `t_final` with the
 * rank-adaptive scheme and returns the final state.
 */
enum HtstepStatus htstep_integrate(const struct HtstepProblem *p,
                                   const char *scheme,
                                   double dt,
                                   double t_final,
                                   const double *constants,
                                   size_t n_constants,
                                   struct HtstepTensor **out,
                                   struct HtstepRunStats *stats);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HTSTEP_H */
