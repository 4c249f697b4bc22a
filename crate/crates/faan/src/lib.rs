//! Low-rank-plus-diagonal covariance estimation: maximum-likelihood and
//! Frobenius-norm factor-model fits, rank bounds and identifiability
//! classification, BIC rank selection, and two application harnesses
//! (array DOA estimation via MUSIC, minimum-variance portfolio backtests).

pub mod bounds;
pub mod covmodel;
pub mod doa;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod portfolio;
pub mod ranksel;
pub mod solvers;

pub use covmodel::{
    frobenius_loss, gaussian_loss, sample_covariance, whiten, FactorFit, Method, SampleCov,
    SigmaInit, SolverConfig,
};
pub use error::{Error, Result};
pub use solvers::FitRequest;
