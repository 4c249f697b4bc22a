#ifndef FAAN_H
#define FAAN_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum FaanStatus {
  FaanStatus_Ok = 0,
  FaanStatus_InvalidArgument = 1,
  FaanStatus_NullPointer = 2,
  FaanStatus_SingularMatrix = 3,
  FaanStatus_NotConverged = 4,
  FaanStatus_Infeasible = 5,
  FaanStatus_InternalError = 6,
} FaanStatus;

/**
 * Fitting method selector for [`faan_fit`].
 */
typedef enum FaanMethod {
  FaanMethod_Faan = 0,
  FaanMethod_Fnm = 1,
  FaanMethod_FnmO = 2,
  FaanMethod_Isotropic = 3,
} FaanMethod;

/**
 * Opaque fit handle; free with [`faan_fit_free`].
 */
typedef struct FaanFit FaanFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Fits a rank-`rank` factor model to the `n x n` row-major sample
 * covariance in `scm`. On success writes a fit handle to `out_fit`.
 * `epsilon <= 0` and `max_iter == 0` select the defaults (1e-3, 1000).
 * Returns `NotConverged`/`Infeasible` *with* a valid handle so callers can
 * still inspect the partial result.
 *
 * # Safety
 * `scm` must point to `n * n` readable doubles and `out_fit` must be a
 * valid writable pointer.
 */
enum FaanStatus faan_fit(const double *scm,
                         uintptr_t n,
                         uintptr_t rank,
                         enum FaanMethod method,
                         double epsilon,
                         uintptr_t max_iter,
                         struct FaanFit **out_fit);

/**
 * Releases a fit handle. Null is a no-op.
 *
 * # Safety
 * `fit` must be null or a pointer obtained from [`faan_fit`] that has not
 * already been freed.
 */
void faan_fit_free(struct FaanFit *fit);

/**
 * Dimension `n` of the fitted model, or 0 on null.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
uintptr_t faan_fit_dim(const struct FaanFit *fit);

/**
 * Factor rank of the fit, or 0 on null.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
uintptr_t faan_fit_rank(const struct FaanFit *fit);

/**
 * Outer iterations taken, or 0 on null.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
uintptr_t faan_fit_iterations(const struct FaanFit *fit);

/**
 * 1 when the stopping rule fired, 0 otherwise (or on null).
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
int32_t faan_fit_converged(const struct FaanFit *fit);

/**
 * 1 when the fit satisfies the model constraints, 0 otherwise (or on null).
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
int32_t faan_fit_feasible(const struct FaanFit *fit);

/**
 * Final value of the objective trace, or NaN on null/empty.
 *
 * # Safety
 * `fit` must be null or a live handle.
 */
double faan_fit_final_loss(const struct FaanFit *fit);

/**
 * Copies the `n` noise variances into `out`.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable for `n` doubles.
 */
enum FaanStatus faan_fit_sigma_sq(const struct FaanFit *fit, double *out);

/**
 * Copies the `n x n` low-rank part `S S^T` into `out`, row-major.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable for `n * n` doubles.
 */
enum FaanStatus faan_fit_sst(const struct FaanFit *fit, double *out);

/**
 * Copies the full fitted covariance `S S^T + Sigma` into `out`, row-major.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable for `n * n` doubles.
 */
enum FaanStatus faan_fit_covariance(const struct FaanFit *fit, double *out);

/**
 * Generic identifiability threshold `(2n + 1 - sqrt(8n + 1)) / 2`,
 * or NaN for `n == 0`.
 */
double faan_ledermann_bound(uintptr_t n);

/**
 * Largest source count resolvable by an n-sensor array
 * (`anisotropic != 0` selects per-sensor noise).
 */
uintptr_t faan_resolvable_sources(uintptr_t n, int32_t anisotropic);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FAAN_H */
