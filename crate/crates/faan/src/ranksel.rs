//! BIC-based selection of the number of factors.

use crate::bounds::param_counts;
use crate::covmodel::{gaussian_loss, FactorFit, Method, SampleCov, SolverConfig};
use crate::error::{Error, Result};
use crate::solvers::FitRequest;

/// The full scan over candidate ranks.
#[derive(Debug, Clone)]
pub struct RankScan {
    pub candidates: Vec<usize>,
    pub scores: Vec<f64>,
    pub fits: Vec<FactorFit>,
    /// Argmin of `scores`; ties break toward smaller rank.
    pub chosen: usize,
}

impl RankScan {
    pub fn chosen_fit(&self) -> &FactorFit {
        let idx = self
            .candidates
            .iter()
            .position(|&r| r == self.chosen)
            .expect("chosen rank is always a candidate");
        &self.fits[idx]
    }
}

/// `N * (Tr(R_hat R_fit^{-1}) + ln|R_fit|) + n_m ln(N n)`. The data term is
/// exactly `N *` the Gaussian loss of the fit (same code path).
pub fn bic_score(scm: &SampleCov, fit: &FactorFit, n_samples: usize) -> Result<f64> {
    if n_samples < 1 {
        return Err(Error::InvalidInput("N must be >= 1".into()));
    }
    let n = scm.n();
    if fit.sst.nrows() != n || fit.sigma_sq.len() != n {
        return Err(Error::InvalidInput("fit dimension mismatch".into()));
    }
    let loss = gaussian_loss(scm, &fit.sst, &fit.sigma_sq)?;
    let (n_m, _) = param_counts(n, fit.rank)?;
    Ok(n_samples as f64 * loss + n_m as f64 * ((n_samples * n) as f64).ln())
}

/// Runs an independent FAAN fit for each rank in `[1, r_max]`, scores each
/// with [`bic_score`], and returns the full scan. Deterministic given
/// `(scm, n_samples, r_max, config)`.
pub fn select_rank(
    scm: &SampleCov,
    n_samples: usize,
    r_max: usize,
    config: &SolverConfig,
) -> Result<RankScan> {
    let n = scm.n();
    if r_max < 1 || r_max >= n {
        return Err(Error::InvalidInput(format!(
            "require 1 <= r_max < n (r_max = {r_max}, n = {n})"
        )));
    }
    let mut candidates = Vec::new();
    let mut scores = Vec::new();
    let mut fits = Vec::new();
    for r in 1..=r_max {
        let fit = FitRequest {
            scm: scm.clone(),
            rank: r,
            config: config.clone(),
            method: Method::Faan,
        }
        .fit()?;
        let score = bic_score(scm, &fit, n_samples)?;
        candidates.push(r);
        scores.push(score);
        fits.push(fit);
    }
    let mut chosen = candidates[0];
    let mut best = scores[0];
    for i in 1..scores.len() {
        if scores[i] < best {
            best = scores[i];
            chosen = candidates[i];
        }
    }
    Ok(RankScan { candidates, scores, fits, chosen })
}
