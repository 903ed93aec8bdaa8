#ifndef ROBUST_L1_H
#define ROBUST_L1_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Truncation function selector.
 */
#define RL_TRUNCATION_SATURATING 0

#define RL_TRUNCATION_LOGQUAD 1

/**
 * Estimator selector for `rl_fit`.
 */
#define RL_ESTIMATOR_TRUNC_L1 0

#define RL_ESTIMATOR_ERM_L1 1

#define RL_ESTIMATOR_MINMAX_L2 2

#define RL_ESTIMATOR_ERM_L2 3

/**
 * Status codes returned by every function.
 */
typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_INVALID_ARGUMENT = 1,
  RL_STATUS_DIMENSION_MISMATCH = 2,
  RL_STATUS_UNSUPPORTED = 3,
  RL_STATUS_IO = 4,
  RL_STATUS_PARSE = 5,
  RL_STATUS_NULL_POINTER = 6,
  RL_STATUS_INTERNAL = 7,
  RL_STATUS_PANIC = 8,
} RlStatus;

/**
 * Opaque dataset handle.
 */
typedef struct RlDataset RlDataset;

/**
 * Solver settings; obtain defaults from `rl_solver_config_default`.
 */
typedef struct RlSolverConfig {
  size_t iterations;
  size_t restarts;
  /**
   * Non-positive selects the ball radius.
   */
  double step_scale;
  uint64_t seed;
  bool polish;
  size_t elemental_starts;
} RlSolverConfig;

/**
 * Summary of a fit; the weights go to a caller-provided buffer.
 */
typedef struct RlFitResult {
  double objective_value;
  /**
   * Scale used, or NaN for estimators without one.
   */
  double alpha;
  double saturation_fraction;
  bool saturation_warning;
  size_t starts_tried;
  size_t best_start_index;
} RlFitResult;

/**
 * Inputs of the truncated-estimator bound. Non-positive `epsilon` selects `1/n`.
 */
typedef struct RlBoundInputs {
  size_t n;
  size_t d;
  double radius;
  double delta;
  double epsilon;
  double mean_norm;
  double mean_sq_norm;
  double sup_l2_risk;
} RlBoundInputs;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread, NUL-terminated and truncated
 * to `capacity`, into `buffer`. Returns the full message length excluding
 * the terminator; pass a null buffer to query it.
 *
 * # Safety
 * `buffer` must be null or valid for `capacity` bytes.
 */
size_t rl_last_error_message(char *buffer, size_t capacity);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rl_version(void);

/**
 * # Safety
 * `out_value` must be null or valid for writes.
 */
enum RlStatus rl_psi(int32_t kind, double x, double *out_value);

/**
 * # Safety
 * `out_value` must be null or valid for writes.
 */
enum RlStatus rl_psi_derivative(int32_t kind, double x, double *out_value);

/**
 * Catoni mean of `len` values. A non-positive or NaN `alpha` selects
 * `sqrt(2 / (n nu))` with the sample variance for `nu`.
 *
 * # Safety
 * `values` must be valid for `len` reads; `out_value` valid for writes.
 */
enum RlStatus rl_catoni_mean(const double *values,
                             size_t len,
                             int32_t kind,
                             double alpha,
                             double *out_value);

/**
 * Builds a dataset from `n` row-major feature rows of width `d` and `n` responses.
 *
 * # Safety
 * `x` must be valid for `n * d` reads, `y` for `n` reads, `out_dataset` for writes.
 */
enum RlStatus rl_dataset_new(size_t d,
                             size_t n,
                             const double *x,
                             const double *y,
                             struct RlDataset **out_dataset);

/**
 * Reads a dataset from a CSV file: `d` feature columns, then the response.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out_dataset` valid for writes.
 */
enum RlStatus rl_dataset_read_csv(const char *path,
                                  bool has_header,
                                  struct RlDataset **out_dataset);

/**
 * Releases a dataset; null is ignored.
 *
 * # Safety
 * `dataset` must be null or a handle from this library not yet freed.
 */
void rl_dataset_free(struct RlDataset *dataset);

/**
 * Number of samples, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t rl_dataset_n(const struct RlDataset *dataset);

/**
 * Feature dimension, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t rl_dataset_dim(const struct RlDataset *dataset);

/**
 * # Safety
 * `out_config` must be null or valid for writes.
 */
enum RlStatus rl_solver_config_default(struct RlSolverConfig *out_config);

/**
 * Truncated l1 objective at `w`.
 *
 * # Safety
 * `dataset` must be a live handle, `w` valid for `w_len` reads, `out_value` for writes.
 */
enum RlStatus rl_truncated_l1_value(const struct RlDataset *dataset,
                                    const double *w,
                                    size_t w_len,
                                    double alpha,
                                    int32_t kind,
                                    double *out_value);

/**
 * Fits an estimator over the ball of radius `radius`.
 *
 * `alpha` is used by the truncated and min-max estimators; a non-positive or
 * NaN value selects `sqrt((d log(6 radius n) + 2 log(1/delta)) / n)`.
 * `lambda` is used by the min-max estimator only. A null `config` selects
 * the defaults. `weights` must hold the dataset dimension.
 *
 * # Safety
 * Pointers must be valid for the documented extents; `config` may be null.
 */
enum RlStatus rl_fit(const struct RlDataset *dataset,
                     int32_t estimator,
                     double radius,
                     double alpha,
                     double delta,
                     int32_t kind,
                     double lambda,
                     const struct RlSolverConfig *config,
                     double *weights,
                     size_t weights_len,
                     struct RlFitResult *out_result);

/**
 * Scale minimising the truncated-estimator bound.
 *
 * # Safety
 * `inputs` must be valid for reads and `out_value` for writes.
 */
enum RlStatus rl_default_alpha(const struct RlBoundInputs *inputs, double *out_value);

/**
 * Excess-risk bound of the truncated estimator at the default scale.
 *
 * # Safety
 * `inputs` must be valid for reads and `out_value` for writes.
 */
enum RlStatus rl_theorem1_bound(const struct RlBoundInputs *inputs, double *out_value);

/**
 * Excess-risk bound of l1 ERM for inputs with `|x| <= max_input_norm`.
 *
 * # Safety
 * `out_value` must be null or valid for writes.
 */
enum RlStatus rl_erm_bound(double radius,
                           double max_input_norm,
                           size_t n,
                           double delta,
                           double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBUST_L1_H */
