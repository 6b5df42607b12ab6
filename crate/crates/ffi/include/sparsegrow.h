#ifndef SPARSEGROW_H
#define SPARSEGROW_H

/* Generated by cbindgen from sparsegrow-ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_ARGUMENT = 1,
  SG_STATUS_MISSING_DATA = 2,
  SG_STATUS_INFEASIBLE_SPARSITY = 3,
  SG_STATUS_NUMERIC_FAILURE = 4,
  SG_STATUS_INVALID_CONFIG = 5,
  SG_STATUS_INVALID_UTF8 = 6,
  SG_STATUS_INTERNAL = 7,
} SgStatus;

/**
 * Opaque experiment configuration handle.
 */
typedef struct SgConfig SgConfig;

/**
 * Opaque training-result handle.
 */
typedef struct SgTrainResult SgTrainResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sg_version(void);

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to `len` writable bytes, or be null (query mode).
 */
size_t sg_last_error_message(char *buf, size_t len);

/**
 * Parse a config document (the same flat key-value text the CLI reads) into
 * a new handle stored in `*out`.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum SgStatus sg_config_parse(const char *text, struct SgConfig **out);

/**
 * Free a config handle. Null is a no-op.
 *
 * # Safety
 * `config` must have come from `sg_config_parse` and not been freed.
 */
void sg_config_free(struct SgConfig *config);

/**
 * Override the config seed.
 *
 * # Safety
 * `config` must be a live handle from `sg_config_parse`.
 */
enum SgStatus sg_config_set_seed(struct SgConfig *config, uint64_t seed);

/**
 * Redirect the run's output directory.
 *
 * # Safety
 * `config` must be a live handle; `dir` a NUL-terminated string.
 */
enum SgStatus sg_config_set_output_dir(struct SgConfig *config, const char *dir);

/**
 * Run training to completion; on success `*out` holds a result handle and
 * `metrics.csv` / `model.bin` are written to the config's output directory.
 *
 * # Safety
 * `config` must be a live handle; `out` a valid pointer.
 */
enum SgStatus sg_train(const struct SgConfig *config, struct SgTrainResult **out);

/**
 * Final test accuracy of a completed run.
 *
 * # Safety
 * `result` must be a live handle from `sg_train`.
 */
double sg_train_result_final_accuracy(const struct SgTrainResult *result);

/**
 * Number of prune-grow rounds the run executed.
 *
 * # Safety
 * `result` must be a live handle from `sg_train`.
 */
uint64_t sg_train_result_rounds(const struct SgTrainResult *result);

/**
 * Number of per-epoch metric records.
 *
 * # Safety
 * `result` must be a live handle from `sg_train`.
 */
uint64_t sg_train_result_epochs(const struct SgTrainResult *result);

/**
 * Free a training-result handle. Null is a no-op.
 *
 * # Safety
 * `result` must have come from `sg_train` and not been freed.
 */
void sg_train_result_free(struct SgTrainResult *result);

/**
 * Write the analytic FLOPs report (`flops.csv`) for a config.
 *
 * # Safety
 * `config` must be a live handle from `sg_config_parse`.
 */
enum SgStatus sg_flops_report(const struct SgConfig *config);

/**
 * Training-FLOPs ratio of guided uniform growth against the dense-gradient
 * baseline on the built-in ImageNet-scale residual network, at the given
 * sparsity, update period, and subset factor. Writes the ratio to `*out`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum SgStatus sg_resnet50_flops_ratio(double sparsity,
                                      uint64_t update_period,
                                      double gamma,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPARSEGROW_H */
