/* C interface to the de-biased sparse PCA library. */

#ifndef DESPCA_H
#define DESPCA_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of a C-ABI call.
 */
typedef enum DespcaStatus {
  DESPCA_STATUS_OK = 0,
  DESPCA_STATUS_NULL_POINTER = 1,
  DESPCA_STATUS_INVALID_INPUT = 2,
  DESPCA_STATUS_NUMERICAL_ERROR = 3,
  DESPCA_STATUS_DEGENERATE_COLUMN = 4,
} DespcaStatus;

/**
 * Opaque pipeline configuration handle.
 */
typedef struct DespcaConfig DespcaConfig;

/**
 * Opaque result handle of one pipeline run.
 */
typedef struct DespcaReport DespcaReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread. Never null.
 */
const char *despca_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *despca_version(void);

/**
 * New configuration with the defaults for an `n x p` problem (every penalty
 * `sqrt(log p / n)`, 95% level). Returns null for invalid sizes.
 */
struct DespcaConfig *despca_config_new(size_t p, size_t n);

/**
 * Releases a configuration handle. Null is ignored.
 */
void despca_config_free(struct DespcaConfig *config);

/**
 * Sets the three penalty levels. Non-negative values required.
 *
 * # Safety
 * `config` must be a live handle from [`despca_config_new`].
 */
enum DespcaStatus despca_config_set_penalties(struct DespcaConfig *config,
                                              double lambda_init,
                                              double lambda,
                                              double lambda_nodewise);

/**
 * Sets the confidence level, strictly between 0 and 1.
 *
 * # Safety
 * `config` must be a live handle from [`despca_config_new`].
 */
enum DespcaStatus despca_config_set_level(struct DespcaConfig *config, double level);

/**
 * Sets the support-threshold constant C (> 0).
 *
 * # Safety
 * `config` must be a live handle from [`despca_config_new`].
 */
enum DespcaStatus despca_config_set_threshold_constant(struct DespcaConfig *config, double c_value);

/**
 * Fixes the locality radius; pass a non-positive value to restore the
 * data-driven default.
 *
 * # Safety
 * `config` must be a live handle from [`despca_config_new`].
 */
enum DespcaStatus despca_config_set_locality_radius(struct DespcaConfig *config, double eta);

/**
 * Enables or disables column-mean centering of the data.
 *
 * # Safety
 * `config` must be a live handle from [`despca_config_new`].
 */
enum DespcaStatus despca_config_set_centering(struct DespcaConfig *config, bool on);

/**
 * Runs the full pipeline on a row-major `n x p` matrix.
 *
 * `config` may be null, in which case the defaults for `(p, n)` apply. On
 * success `*out_report` owns the result and must be released with
 * [`despca_report_free`].
 *
 * # Safety
 * `data` must point to `n * p` doubles; `out_report` must be a valid
 * non-null destination; `config`, when non-null, must be a live handle.
 */
enum DespcaStatus despca_run(const double *data,
                             size_t n,
                             size_t p,
                             const struct DespcaConfig *config,
                             struct DespcaReport **out_report);

/**
 * Releases a report handle. Null is ignored.
 */
void despca_report_free(struct DespcaReport *report);

/**
 * Dimension `p` of the fitted problem; 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t despca_report_dim(const struct DespcaReport *report);

/**
 * Sample size the report was fitted on; 0 for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
size_t despca_report_sample_size(const struct DespcaReport *report);

/**
 * Copies the penalized loadings estimate into `out` (length `p`).
 *
 * # Safety
 * `report` must be a live handle; `out` must hold `despca_report_dim` doubles.
 */
enum DespcaStatus despca_report_loadings(const struct DespcaReport *report, double *out);

/**
 * Copies the de-biased loadings estimate into `out` (length `p`).
 *
 * # Safety
 * `report` must be a live handle; `out` must hold `despca_report_dim` doubles.
 */
enum DespcaStatus despca_report_debiased(const struct DespcaReport *report, double *out);

/**
 * Copies the classical PCA baseline into `out` (length `p`).
 *
 * # Safety
 * `report` must be a live handle; `out` must hold `despca_report_dim` doubles.
 */
enum DespcaStatus despca_report_classical(const struct DespcaReport *report, double *out);

/**
 * Copies the estimated per-coordinate standard deviations into `out`
 * (length `p`).
 *
 * # Safety
 * `report` must be a live handle; `out` must hold `despca_report_dim` doubles.
 */
enum DespcaStatus despca_report_sigma(const struct DespcaReport *report, double *out);

/**
 * De-biased estimate of the largest eigenvalue; NaN for a null handle.
 *
 * # Safety
 * `report` must be null or a live handle.
 */
double despca_report_eigenvalue(const struct DespcaReport *report);

/**
 * Confidence interval of coordinate `index` (0-based).
 *
 * # Safety
 * `report` must be a live handle; `lower` and `upper` must be valid.
 */
enum DespcaStatus despca_report_interval(const struct DespcaReport *report,
                                         size_t index,
                                         double *lower,
                                         double *upper);

/**
 * Writes up to `capacity` recovered support indices (0-based) into `out`
 * and returns the total support size. Call with capacity 0 to query the
 * size.
 *
 * # Safety
 * `report` must be a live handle; `out` must hold `capacity` entries when
 * `capacity > 0`.
 */
size_t despca_report_support(const struct DespcaReport *report, size_t *out, size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DESPCA_H */
