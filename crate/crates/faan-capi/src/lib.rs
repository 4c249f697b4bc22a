//! C ABI over the covariance estimation core. Fits are returned as opaque
//! handles; every function reports a status code and writes results through
//! out-pointers. All matrices cross the boundary as row-major `double`
//! buffers.

use std::ptr;

use faan::covmodel::{Method, SampleCov, SolverConfig};
use faan::error::Error;
use faan::solvers::FitRequest;
use nalgebra::DMatrix;

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaanStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    SingularMatrix = 3,
    NotConverged = 4,
    Infeasible = 5,
    InternalError = 6,
}

/// Fitting method selector for [`faan_fit`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaanMethod {
    Faan = 0,
    Fnm = 1,
    FnmO = 2,
    Isotropic = 3,
}

/// Opaque fit handle; free with [`faan_fit_free`].
pub struct FaanFit {
    inner: faan::covmodel::FactorFit,
}

fn status_of(err: &Error) -> FaanStatus {
    match err {
        Error::InvalidInput(_) | Error::Parse(_) => FaanStatus::InvalidArgument,
        Error::SingularMatrix | Error::SingularModel => FaanStatus::SingularMatrix,
        _ => FaanStatus::InternalError,
    }
}

/// Fits a rank-`rank` factor model to the `n x n` row-major sample
/// covariance in `scm`. On success writes a fit handle to `out_fit`.
/// `epsilon <= 0` and `max_iter == 0` select the defaults (1e-3, 1000).
/// Returns `NotConverged`/`Infeasible` *with* a valid handle so callers can
/// still inspect the partial result.
///
/// # Safety
/// `scm` must point to `n * n` readable doubles and `out_fit` must be a
/// valid writable pointer.
#[no_mangle]
pub unsafe extern "C" fn faan_fit(
    scm: *const f64,
    n: usize,
    rank: usize,
    method: FaanMethod,
    epsilon: f64,
    max_iter: usize,
    out_fit: *mut *mut FaanFit,
) -> FaanStatus {
    if scm.is_null() || out_fit.is_null() {
        return FaanStatus::NullPointer;
    }
    if n == 0 {
        return FaanStatus::InvalidArgument;
    }
    *out_fit = ptr::null_mut();
    let data = std::slice::from_raw_parts(scm, n * n);
    let m = DMatrix::from_row_slice(n, n, data);
    let scm = match SampleCov::from_matrix(m) {
        Ok(s) => s,
        Err(e) => return status_of(&e),
    };
    let config = SolverConfig {
        epsilon: if epsilon > 0.0 { epsilon } else { 1e-3 },
        max_iter: if max_iter > 0 { max_iter } else { 1000 },
        ..SolverConfig::default()
    };
    let method = match method {
        FaanMethod::Faan => Method::Faan,
        FaanMethod::Fnm => Method::Fnm,
        FaanMethod::FnmO => Method::FnmO,
        FaanMethod::Isotropic => Method::Isotropic,
    };
    match (FitRequest { scm, rank, config, method }).fit() {
        Ok(fit) => {
            let status = if !fit.converged {
                FaanStatus::NotConverged
            } else if !fit.feasible {
                FaanStatus::Infeasible
            } else {
                FaanStatus::Ok
            };
            *out_fit = Box::into_raw(Box::new(FaanFit { inner: fit }));
            status
        }
        Err(e) => status_of(&e),
    }
}

/// Releases a fit handle. Null is a no-op.
///
/// # Safety
/// `fit` must be null or a pointer obtained from [`faan_fit`] that has not
/// already been freed.
#[no_mangle]
pub unsafe extern "C" fn faan_fit_free(fit: *mut FaanFit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}

/// Dimension `n` of the fitted model, or 0 on null.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn faan_fit_dim(fit: *const FaanFit) -> usize {
    if fit.is_null() {
        return 0;
    }
    (*fit).inner.sst.nrows()
}

/// Factor rank of the fit, or 0 on null.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn faan_fit_rank(fit: *const FaanFit) -> usize {
    if fit.is_null() {
        return 0;
    }
    (*fit).inner.rank
}

/// Outer iterations taken, or 0 on null.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn faan_fit_iterations(fit: *const FaanFit) -> usize {
    if fit.is_null() {
        return 0;
    }
    (*fit).inner.iterations
}

/// 1 when the stopping rule fired, 0 otherwise (or on null).
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn faan_fit_converged(fit: *const FaanFit) -> i32 {
    if fit.is_null() {
        return 0;
    }
    (*fit).inner.converged as i32
}

/// 1 when the fit satisfies the model constraints, 0 otherwise (or on null).
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn faan_fit_feasible(fit: *const FaanFit) -> i32 {
    if fit.is_null() {
        return 0;
    }
    (*fit).inner.feasible as i32
}

/// Final value of the objective trace, or NaN on null/empty.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn faan_fit_final_loss(fit: *const FaanFit) -> f64 {
    if fit.is_null() {
        return f64::NAN;
    }
    (*fit).inner.final_loss()
}

/// Copies the `n` noise variances into `out`.
///
/// # Safety
/// `fit` must be a live handle and `out` writable for `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn faan_fit_sigma_sq(fit: *const FaanFit, out: *mut f64) -> FaanStatus {
    if fit.is_null() || out.is_null() {
        return FaanStatus::NullPointer;
    }
    let sigma = &(*fit).inner.sigma_sq;
    let dst = std::slice::from_raw_parts_mut(out, sigma.len());
    for (d, s) in dst.iter_mut().zip(sigma.iter()) {
        *d = *s;
    }
    FaanStatus::Ok
}

/// Copies the `n x n` low-rank part `S S^T` into `out`, row-major.
///
/// # Safety
/// `fit` must be a live handle and `out` writable for `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn faan_fit_sst(fit: *const FaanFit, out: *mut f64) -> FaanStatus {
    if fit.is_null() || out.is_null() {
        return FaanStatus::NullPointer;
    }
    let sst = &(*fit).inner.sst;
    let n = sst.nrows();
    let dst = std::slice::from_raw_parts_mut(out, n * n);
    for i in 0..n {
        for j in 0..n {
            dst[i * n + j] = sst[(i, j)];
        }
    }
    FaanStatus::Ok
}

/// Copies the full fitted covariance `S S^T + Sigma` into `out`, row-major.
///
/// # Safety
/// `fit` must be a live handle and `out` writable for `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn faan_fit_covariance(fit: *const FaanFit, out: *mut f64) -> FaanStatus {
    if fit.is_null() || out.is_null() {
        return FaanStatus::NullPointer;
    }
    let cov = (*fit).inner.fitted_cov();
    let n = cov.nrows();
    let dst = std::slice::from_raw_parts_mut(out, n * n);
    for i in 0..n {
        for j in 0..n {
            dst[i * n + j] = cov[(i, j)];
        }
    }
    FaanStatus::Ok
}

/// Generic identifiability threshold `(2n + 1 - sqrt(8n + 1)) / 2`,
/// or NaN for `n == 0`.
#[no_mangle]
pub extern "C" fn faan_ledermann_bound(n: usize) -> f64 {
    faan::bounds::ledermann_bound(n).unwrap_or(f64::NAN)
}

/// Largest source count resolvable by an n-sensor array
/// (`anisotropic != 0` selects per-sensor noise).
#[no_mangle]
pub extern "C" fn faan_resolvable_sources(n: usize, anisotropic: i32) -> usize {
    faan::bounds::resolvable_sources(n, anisotropic != 0)
}
