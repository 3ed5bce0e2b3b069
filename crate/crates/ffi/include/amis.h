#ifndef AMIS_H
#define AMIS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum AmisStatus {
  AMIS_STATUS_OK = 0,
  AMIS_STATUS_NULL_POINTER = 1,
  AMIS_STATUS_INVALID_ARGUMENT = 2,
  AMIS_STATUS_DIMENSION_MISMATCH = 3,
  /**
   * Importance weights underflowed or were all zero.
   */
  AMIS_STATUS_NUMERIC = 4,
  AMIS_STATUS_CONFIG = 5,
  AMIS_STATUS_RUN_FAILED = 6,
  AMIS_STATUS_BUFFER_TOO_SMALL = 7,
  AMIS_STATUS_PANIC = 8,
} AmisStatus;

/**
 * Experiment configuration handle. Unset fields take the defaults of the
 * configured algorithm when the experiment runs.
 */
typedef struct AmisConfig AmisConfig;

/**
 * Mixture proposal handle.
 */
typedef struct AmisProposal AmisProposal;

/**
 * Experiment report handle.
 */
typedef struct AmisReport AmisReport;

/**
 * Importance-sampling estimate of one counterfactual Gaussian.
 */
typedef struct AmisEstimate {
  double estimate;
  double ess;
  double std_error;
} AmisEstimate;

/**
 * Plain-data copy of a report. `fci` is NaN when `has_fci` is 0.
 */
typedef struct AmisReportSummary {
  double gamma;
  double ess_threshold;
  size_t n;
  size_t t;
  size_t r;
  uint64_t seed;
  double mean_regret;
  double mae;
  double mse;
  double var;
  uint8_t has_fci;
  double fci;
  double prc;
} AmisReportSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *amis_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *amis_version(void);

/**
 * Builds a `k`-component diagonal Gaussian mixture in `dim` dimensions.
 * `means` and `sigmas` are row-major `k x dim`; `weights` has `k` entries
 * summing to 1.
 *
 * # Safety
 * Array arguments must be valid for the stated lengths and `out` writable.
 */
enum AmisStatus amis_proposal_new(const double *means,
                                  const double *sigmas,
                                  const double *weights,
                                  size_t k,
                                  size_t dim,
                                  struct AmisProposal **out);

/**
 * Releases a proposal. Null is ignored.
 *
 * # Safety
 * `p` must be null or a handle from [`amis_proposal_new`] not yet freed.
 */
void amis_proposal_free(struct AmisProposal *p);

/**
 * Writes the dimension of `p` to `out`.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
enum AmisStatus amis_proposal_dim(const struct AmisProposal *p, size_t *out);

/**
 * Log density of the mixture at `x` (`dim` coordinates).
 *
 * # Safety
 * `x` must be valid for `dim` reads and `out` writable.
 */
enum AmisStatus amis_proposal_log_pdf(const struct AmisProposal *p,
                                      const double *x,
                                      size_t dim,
                                      double *out);

/**
 * Draws `n` points into `out_points`, row-major `n x dim`. The same
 * `seed` always yields the same points.
 *
 * # Safety
 * `out_points` must be writable for `n * dim` doubles.
 */
enum AmisStatus amis_proposal_sample(const struct AmisProposal *p,
                                     uint64_t seed,
                                     size_t n,
                                     double *out_points);

/**
 * Importance-sampling estimate of `E_p[f]` for the diagonal Gaussian
 * `p = N(p_mean, p_sigma)` from `n` points `xs` (row-major `n x dim`)
 * drawn from `q`, with KPI values `f`.
 *
 * # Safety
 * Array arguments must be valid for the stated lengths and `out` writable.
 */
enum AmisStatus amis_estimate(const struct AmisProposal *q,
                              const double *p_mean,
                              const double *p_sigma,
                              size_t dim,
                              const double *xs,
                              const double *f,
                              size_t n,
                              struct AmisEstimate *out);

/**
 * New configuration for `algorithm` (`GIS`, `MVU`, `GU` or `PCU`).
 *
 * # Safety
 * `algorithm` must be a NUL-terminated string and `out` writable.
 */
enum AmisStatus amis_config_new(const char *algorithm, struct AmisConfig **out);

/**
 * Configuration parsed from TOML text using the experiment field names.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` writable.
 */
enum AmisStatus amis_config_from_toml(const char *toml, struct AmisConfig **out);

/**
 * Sets one numeric field: `gamma`, `ess_threshold`, `master_seed`,
 * `n_samples`, `t_iterations`, `r_runs`, `delta`,
 * `peak_distance_coefficient`, `confidence_coefficient`,
 * `counterfactual_sigma` or `grid_size`. Counts and the seed must be
 * non-negative integers. The whole configuration is revalidated and left
 * unchanged on error.
 *
 * # Safety
 * `cfg` must be a live handle and `field` a NUL-terminated string.
 */
enum AmisStatus amis_config_set(struct AmisConfig *cfg, const char *field, double value);

/**
 * Releases a configuration. Null is ignored.
 *
 * # Safety
 * `cfg` must be null or a live configuration handle.
 */
void amis_config_free(struct AmisConfig *cfg);

/**
 * Runs the configured experiment. `parallel` non-zero spreads runs over
 * threads; the report is the same either way.
 *
 * # Safety
 * `cfg` must be a live handle and `out` writable.
 */
enum AmisStatus amis_run_experiment(const struct AmisConfig *cfg,
                                    uint8_t parallel,
                                    struct AmisReport **out);

/**
 * Copies the report's numbers into `out`.
 *
 * # Safety
 * `report` must be a live handle and `out` writable.
 */
enum AmisStatus amis_report_summary(const struct AmisReport *report, struct AmisReportSummary *out);

/**
 * Writes the report as CSV (header plus one row) into `buf`, NUL
 * terminated. `needed` receives the required size including the NUL; when
 * `cap` is too small nothing is written and `AMIS_STATUS_BUFFER_TOO_SMALL`
 * is returned. `buf` may be null when `cap` is 0.
 *
 * # Safety
 * `buf` must be writable for `cap` bytes and `needed` writable.
 */
enum AmisStatus amis_report_csv(const struct AmisReport *report,
                                char *buf,
                                size_t cap,
                                size_t *needed);

/**
 * Releases a report. Null is ignored.
 *
 * # Safety
 * `report` must be null or a live report handle.
 */
void amis_report_free(struct AmisReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AMIS_H */
