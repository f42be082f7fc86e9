#ifndef PRIVMASK_H
#define PRIVMASK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum PmBoundaryStatus {
  PM_BOUNDARY_STATUS_OK = 0,
  PM_BOUNDARY_STATUS_UPLINK_UNBOUNDED = 1,
  PM_BOUNDARY_STATUS_DOWNLINK_UNBOUNDED = 2,
} PmBoundaryStatus;

/**
 * Result code of every `pm_*` call.
 */
typedef enum PmStatus {
  PM_STATUS_OK = 0,
  PM_STATUS_INVALID_ARGUMENT = 1,
  PM_STATUS_ZERO_GAIN = 2,
  PM_STATUS_NEGATIVE_VARIANCE = 3,
  PM_STATUS_NEGATIVE_WEIGHT = 4,
  PM_STATUS_NON_FINITE = 5,
  PM_STATUS_ILL_DEFINED_NNR = 6,
  PM_STATUS_ZERO_UPLINK = 7,
  PM_STATUS_NEGATIVE_INPUT = 8,
  PM_STATUS_DEGENERATE_ALL = 9,
  PM_STATUS_NO_CONVERGENCE = 10,
  PM_STATUS_UNSTABLE_CLOSED_LOOP = 11,
  PM_STATUS_DEGENERATE_MASKS = 12,
  PM_STATUS_NON_POSITIVE_ALPHA = 13,
  PM_STATUS_HORIZON_TOO_LARGE = 14,
  PM_STATUS_SINGULAR_BLOCK = 15,
  PM_STATUS_HORIZON_TOO_SHORT = 16,
  PM_STATUS_ZERO_PROCESS_NOISE = 17,
  PM_STATUS_EMPTY_INPUT = 18,
  PM_STATUS_NULL_POINTER = 100,
  PM_STATUS_PANIC = 101,
} PmStatus;

typedef enum PmTarget {
  PM_TARGET_MEASUREMENT = 0,
  PM_TARGET_ESTIMATE = 1,
} PmTarget;

/**
 * Validated plant, gain and cost weights.
 */
typedef struct PmSystem PmSystem;

/**
 * Stored Monte Carlo trajectories.
 */
typedef struct PmTrajectoryBatch PmTrajectoryBatch;

/**
 * Mask variances; validated where used.
 */
typedef struct PmMasks {
  double m;
  double n;
} PmMasks;

typedef struct PmPrivacyRates {
  double uplink;
  double downlink;
  double total;
  bool divergent;
} PmPrivacyRates;

typedef struct PmDesignReport {
  double alpha_star;
  double c4;
  double c3;
  double c1;
  double c0;
  double residual;
  double mi_min;
} PmDesignReport;

typedef struct PmTradeoffPoint {
  double lambda;
  double alpha_opt;
  double mi;
  double cost;
  double objective;
  double foc_residual;
  bool at_boundary;
} PmTradeoffPoint;

typedef struct PmFiniteHorizonInfo {
  uintptr_t horizon;
  double forward_sum;
  double backward_sum;
  double total;
} PmFiniteHorizonInfo;

typedef struct PmDirectedInfo {
  double forward;
  double backward;
} PmDirectedInfo;

typedef struct PmStepRecord {
  uintptr_t t;
  double x;
  double n;
  double y;
  double u;
  double m;
  double v;
  double w;
  double xhat_pred;
  double xhat;
  double s_pred;
  double gain;
} PmStepRecord;

typedef struct PmEstimate {
  double mean;
  double std_err;
} PmEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread, or "" after a
 * success. Valid until the next `pm_*` call on the same thread.
 */
const char *pm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pm_version(void);

/**
 * Creates a parameter handle. Release it with [`pm_system_free`].
 */
enum PmStatus pm_system_new(double a,
                            double k,
                            double w,
                            double q,
                            double r,
                            struct PmSystem **system);

/**
 * Releases a handle from [`pm_system_new`]. Null is ignored.
 *
 * # Safety
 * `system` must be null or a live handle not freed before.
 */
void pm_system_free(struct PmSystem *system);

enum PmStatus pm_solve_are(double a, double p, double n, double *sigma);

enum PmStatus pm_mi_rate(const struct PmSystem *system,
                         struct PmMasks masks,
                         struct PmPrivacyRates *rates);

enum PmStatus pm_mi_rate_from_nnr(const struct PmSystem *system,
                                  double alpha,
                                  struct PmPrivacyRates *rates);

enum PmStatus pm_control_cost_rate(const struct PmSystem *system,
                                   struct PmMasks masks,
                                   double *cost);

enum PmStatus pm_optimal_nnr(double a, double k, struct PmDesignReport *report);

enum PmStatus pm_masks_from_nnr(double alpha, double w, double m, struct PmMasks *masks);

enum PmStatus pm_tradeoff_point(const struct PmSystem *system,
                                double lambda,
                                struct PmTradeoffPoint *point);

enum PmStatus pm_boundary_diagnostics(struct PmMasks masks,
                                      double w,
                                      enum PmBoundaryStatus *status);

enum PmStatus pm_finite_horizon_info(const struct PmSystem *system,
                                     struct PmMasks masks,
                                     uintptr_t horizon,
                                     struct PmFiniteHorizonInfo *info);

enum PmStatus pm_exact_directed_info(const struct PmSystem *system,
                                     struct PmMasks masks,
                                     uintptr_t horizon,
                                     enum PmTarget target,
                                     struct PmDirectedInfo *info);

/**
 * Simulates `trajectories` runs of `horizon` steps. Release the batch
 * with [`pm_batch_free`].
 */
enum PmStatus pm_simulate(const struct PmSystem *system,
                          struct PmMasks masks,
                          uintptr_t horizon,
                          uintptr_t trajectories,
                          uint64_t seed,
                          struct PmTrajectoryBatch **batch);

/**
 * Releases a batch from [`pm_simulate`]. Null is ignored.
 *
 * # Safety
 * `batch` must be null or a live handle not freed before.
 */
void pm_batch_free(struct PmTrajectoryBatch *batch);

/**
 * Number of trajectories and the horizon (steps `0..=horizon`).
 */
enum PmStatus pm_batch_shape(const struct PmTrajectoryBatch *batch,
                             uintptr_t *trajectories,
                             uintptr_t *horizon);

enum PmStatus pm_batch_record(const struct PmTrajectoryBatch *batch,
                              uintptr_t trajectory,
                              uintptr_t t,
                              struct PmStepRecord *record);

enum PmStatus pm_empirical_cost(const struct PmTrajectoryBatch *batch,
                                double q,
                                double r,
                                uintptr_t burn_in,
                                struct PmEstimate *estimate);

enum PmStatus pm_empirical_prediction_error(const struct PmTrajectoryBatch *batch,
                                            uintptr_t burn_in,
                                            struct PmEstimate *estimate);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRIVMASK_H */
