//! Rank bounds, identifiability classification, MLE-existence conditions,
//! the generalized Ruhe trace bound, and a generator of test matrices whose
//! minimum decomposition rank is `n - 1`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::covmodel::{FactorFit, SampleCov};
use crate::error::{Error, Result};
use crate::linalg::sym_eig_desc;

/// Identifiability class of the rank-r model at dimension n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum IdentifiabilityClass {
    GloballyIdentifiable,
    LocallyIdentifiable,
    Unidentifiable,
}

/// Classification outcome with the underlying counts.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IdentifiabilityVerdict {
    pub n: usize,
    pub r: usize,
    pub r_l: f64,
    pub n_m: usize,
    pub n_c: usize,
    pub class: IdentifiabilityClass,
}

/// Generic identifiability threshold `(2n + 1 - sqrt(8n + 1)) / 2`.
pub fn ledermann_bound(n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidInput("n must be >= 1".into()));
    }
    let nf = n as f64;
    Ok((2.0 * nf + 1.0 - (8.0 * nf + 1.0).sqrt()) / 2.0)
}

/// Model parameter count `n_m` and constraint count `n_c` for dimension `n`
/// and rank `r`.
pub fn param_counts(n: usize, r: usize) -> Result<(usize, usize)> {
    if r >= n {
        return Err(Error::InvalidInput(format!("require r < n (r = {r}, n = {n})")));
    }
    let n_c = n * (n + 1) / 2;
    let n_m = (n - r) * r + r * (r + 1) / 2 + n;
    Ok((n_m, n_c))
}

/// Data-dependent lower bound on the decomposition rank: the number of
/// positive eigenvalues of `R_hat - [diag(R_hat^{-1})]^{-1}`.
pub fn guttman_bound(scm: &SampleCov) -> Result<usize> {
    let n = scm.n();
    let inv = scm
        .entries()
        .clone()
        .try_inverse()
        .ok_or(Error::SingularMatrix)?;
    let mut arg = scm.entries().clone();
    for k in 0..n {
        let d = inv[(k, k)];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::SingularMatrix);
        }
        arg[(k, k)] -= 1.0 / d;
    }
    let arg = (&arg + arg.transpose()) * 0.5;
    let (eigs, _) = sym_eig_desc(&arg);
    let spectral = eigs
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(1e-300);
    // eigenvalues within 1e-9 of the spectral radius of zero do not count
    Ok(eigs.iter().filter(|&&v| v > 1e-9 * spectral).count())
}

/// Generalized Ruhe trace lower bound
/// `sum_i lambda_i(A) * lambda_{n+1-i}(B)` for descending eigenvalue lists.
pub fn ruhe_lower_bound(eigs_a: &[f64], eigs_b: &[f64]) -> Result<f64> {
    if eigs_a.len() != eigs_b.len() {
        return Err(Error::InvalidInput("eigenvalue lists differ in length".into()));
    }
    let n = eigs_a.len();
    Ok((0..n).map(|i| eigs_a[i] * eigs_b[n - 1 - i]).sum())
}

/// Classifies the rank-r model at dimension n against the identifiability
/// threshold. The `r = r_L` case is decided with exact integer arithmetic on
/// `2r` vs `2n + 1 - sqrt(8n + 1)` (attainable only when `8n + 1` is a
/// perfect square).
pub fn identifiability_class(n: usize, r: usize) -> Result<IdentifiabilityVerdict> {
    if r < 1 || r >= n {
        return Err(Error::InvalidInput(format!(
            "require 1 <= r < n (r = {r}, n = {n})"
        )));
    }
    let (n_m, n_c) = param_counts(n, r)?;
    let r_l = ledermann_bound(n)?;
    let disc = 8 * n + 1;
    let s = (disc as f64).sqrt().round() as usize;
    let class = if s * s == disc {
        // r_L = (2n + 1 - s) / 2 exactly; 8n+1 odd implies s odd, so 2n+1-s is even
        let two_rl = 2 * n + 1 - s;
        match (2 * r).cmp(&two_rl) {
            std::cmp::Ordering::Less => IdentifiabilityClass::GloballyIdentifiable,
            std::cmp::Ordering::Equal => IdentifiabilityClass::LocallyIdentifiable,
            std::cmp::Ordering::Greater => IdentifiabilityClass::Unidentifiable,
        }
    } else if (r as f64) < r_l {
        IdentifiabilityClass::GloballyIdentifiable
    } else {
        IdentifiabilityClass::Unidentifiable
    };
    Ok(IdentifiabilityVerdict { n, r, r_l, n_m, n_c, class })
}

/// Existence regimes for the rank-r Gaussian MLE at sample size N.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum MleExistence {
    /// `N >= n`: exists with probability one.
    ExistsWp1,
    /// `r <= N < n`: still exists with probability one.
    ExistsWp1SmallSample,
    /// `N < r`: the likelihood is unbounded, no MLE.
    DoesNotExist,
}

pub fn mle_existence(n_samples: usize, n: usize, r: usize) -> MleExistence {
    if n_samples >= n {
        MleExistence::ExistsWp1
    } else if n_samples >= r {
        MleExistence::ExistsWp1SmallSample
    } else {
        MleExistence::DoesNotExist
    }
}

/// Maximum number of sources uniquely resolvable with an `n`-sensor array:
/// `floor(n/2 - 0.5)` under isotropic noise, and
/// `floor(n/2 + 0.25 (1 - sqrt(8n + 1)))` under anisotropic noise.
pub fn resolvable_sources(n: usize, anisotropic: bool) -> usize {
    let nf = n as f64;
    let bound = if anisotropic {
        nf / 2.0 + 0.25 * (1.0 - (8.0 * nf + 1.0).sqrt())
    } else {
        nf / 2.0 - 0.5
    };
    bound.floor().max(0.0) as usize
}

/// Generates an SPD matrix whose inverse has all entries >= 0, so its minimum
/// exact low-rank-plus-diagonal decomposition rank is `n - 1`. Deterministic
/// per seed.
pub fn frisch_test_matrix(n: usize, seed: u64) -> Result<SampleCov> {
    if n < 2 {
        return Err(Error::InvalidInput("n must be >= 2".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    loop {
        // B = v v^T + delta I with v > 0 entrywise is SPD and entrywise
        // positive; the returned matrix is B^{-1}, so its inverse is >= 0.
        // The small ridge keeps the off-diagonal structure strong, which is
        // what makes the data-dependent rank bound informative here.
        let v = DVector::from_fn(n, |_, _| rng.random_range(0.2..1.0));
        let delta = rng.random_range(0.01..0.1);
        let b = &v * v.transpose() + DMatrix::identity(n, n) * delta;
        let Some(inv) = b.clone().try_inverse() else {
            continue;
        };
        let inv = (&inv + inv.transpose()) * 0.5;
        let candidate = SampleCov::from_matrix(inv)?;
        // verify the inverse-nonnegativity condition on the delivered matrix
        let check = candidate
            .entries()
            .clone()
            .try_inverse()
            .ok_or(Error::SingularMatrix)?;
        if check.iter().all(|&v| v >= -1e-12) {
            return Ok(candidate);
        }
    }
}

/// Maximum relative mismatch between `diag(ssT + Sigma)` and `diag(R_hat)`;
/// zero at every stationary point of the Gaussian loss, so nonzero values
/// flag an unconverged fit.
pub fn diagonal_matching_residual(scm: &SampleCov, fit: &FactorFit) -> Result<f64> {
    let n = scm.n();
    if fit.sst.nrows() != n || fit.sigma_sq.len() != n {
        return Err(Error::InvalidInput("fit dimension mismatch".into()));
    }
    let mut worst = 0.0f64;
    for k in 0..n {
        let rkk = scm.entries()[(k, k)];
        if rkk == 0.0 {
            return Err(Error::NonPositiveDiagonal);
        }
        let fitted = fit.sst[(k, k)] + fit.sigma_sq[k];
        worst = worst.max(((fitted - rkk) / rkk).abs());
    }
    Ok(worst)
}

/// Mean of per-instance values followed by round-up, as used when comparing
/// averaged data-dependent bounds against the generic threshold.
pub fn mean_ceil(values: &[usize]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean = values.iter().sum::<usize>() as f64 / values.len() as f64;
    mean.ceil()
}
