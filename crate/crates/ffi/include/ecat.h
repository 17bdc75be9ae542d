#ifndef ECAT_H
#define ECAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EcatStatus {
  ECAT_STATUS_OK = 0,
  ECAT_STATUS_NULL_POINTER = 1,
  ECAT_STATUS_INVALID_UTF8 = 2,
  ECAT_STATUS_CONFIG = 3,
  ECAT_STATUS_DATA = 4,
  ECAT_STATUS_NUMERIC = 5,
  ECAT_STATUS_IO = 6,
  ECAT_STATUS_FORMAT = 7,
  ECAT_STATUS_CHECKPOINT = 8,
  ECAT_STATUS_OUT_OF_RANGE = 9,
  ECAT_STATUS_PANIC = 10,
} EcatStatus;

/**
 * Experiment configuration handle.
 */
typedef struct EcatConfig EcatConfig;

/**
 * Metrics table handle.
 */
typedef struct EcatMetrics EcatMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library.
 */
const char *ecat_last_error_message(void);

/**
 * Library version, a static NUL-terminated string.
 */
const char *ecat_version(void);

/**
 * New configuration holding the built-in defaults.
 */
struct EcatConfig *ecat_config_default(void);

/**
 * Parse a TOML configuration document.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EcatStatus ecat_config_from_toml(const char *toml, struct EcatConfig **out);

/**
 * Apply a `dotted.key=value` override in place.
 *
 * # Safety
 * `cfg` must come from this library; `assignment` must be NUL-terminated.
 */
enum EcatStatus ecat_config_set(struct EcatConfig *cfg, const char *assignment);

/**
 * # Safety
 * `cfg` must come from this library or be null.
 */
void ecat_config_free(struct EcatConfig *cfg);

/**
 * Run one experiment with the configuration's own seed.
 *
 * # Safety
 * `cfg` must come from this library; `out` must be a valid pointer.
 */
enum EcatStatus ecat_run_experiment(const struct EcatConfig *cfg, struct EcatMetrics **out);

/**
 * Run a comparison suite (`sample_transfer`, `adaptive_ablation`, or
 * `transfer_setting`) over `n_seeds` seeds.
 *
 * # Safety
 * `cfg` must come from this library, `kind` must be NUL-terminated,
 * `seeds` must point to `n_seeds` values, and `out` must be valid.
 */
enum EcatStatus ecat_run_suite(const struct EcatConfig *cfg,
                               const char *kind,
                               const uint64_t *seeds,
                               size_t n_seeds,
                               struct EcatMetrics **out);

/**
 * Number of rows; 0 for a null handle.
 *
 * # Safety
 * `m` must come from this library or be null.
 */
size_t ecat_metrics_len(const struct EcatMetrics *m);

/**
 * AUC of row `index`.
 *
 * # Safety
 * `m` must come from this library; `out` must be valid.
 */
enum EcatStatus ecat_metrics_auc(const struct EcatMetrics *m, size_t index, double *out);

/**
 * Write the table as CSV or JSON, chosen by the `.csv` / `.json` extension.
 *
 * # Safety
 * `m` must come from this library; `path` must be NUL-terminated.
 */
enum EcatStatus ecat_metrics_write(const struct EcatMetrics *m, const char *path);

/**
 * # Safety
 * `m` must come from this library or be null.
 */
void ecat_metrics_free(struct EcatMetrics *m);

/**
 * Rank-based AUC of `n` scores against 0/1 labels.
 *
 * # Safety
 * `scores` and `labels` must point to `n` values; `out` must be valid.
 */
enum EcatStatus ecat_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECAT_H */
