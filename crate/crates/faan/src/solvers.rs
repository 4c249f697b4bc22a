//! The four fitting procedures: FAAN coordinate-descent maximum likelihood,
//! the original and clamped Frobenius-norm alternating minimizations, and the
//! closed-form isotropic ML estimate.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::covmodel::{
    frobenius_loss, gaussian_loss, whiten, FactorFit, Method, SampleCov, SigmaInit, SolverConfig,
};
use crate::error::{Error, Result};
use crate::linalg::sym_eig_desc;

/// A complete fitting request.
#[derive(Debug, Clone)]
pub struct FitRequest {
    pub scm: SampleCov,
    pub rank: usize,
    pub config: SolverConfig,
    pub method: Method,
}

impl FitRequest {
    pub fn validate(&self) -> Result<()> {
        let n = self.scm.n();
        if self.rank < 1 || self.rank >= n {
            return Err(Error::InvalidInput(format!(
                "rank must satisfy 1 <= r < n (r = {}, n = {})",
                self.rank, n
            )));
        }
        self.config.validate()?;
        if let SigmaInit::Explicit(v) = &self.config.sigma_init {
            if v.len() != n {
                return Err(Error::InvalidInput("explicit sigma init has wrong length".into()));
            }
        }
        if matches!(self.method, Method::Faan | Method::Isotropic) && !self.scm.has_positive_diagonal() {
            return Err(Error::NonPositiveDiagonal);
        }
        Ok(())
    }

    /// Dispatches to the solver selected by `method`.
    pub fn fit(&self) -> Result<FactorFit> {
        match self.method {
            Method::Faan => faan_fit(self),
            Method::Fnm => fnm_fit(self),
            Method::FnmO => fnmo_fit(self),
            Method::Isotropic => isotropic_ml(&self.scm, self.rank),
        }
    }
}

fn initial_sigma_sq(scm: &SampleCov, config: &SolverConfig) -> DVector<f64> {
    match &config.sigma_init {
        SigmaInit::Identity => DVector::from_element(scm.n(), 1.0),
        SigmaInit::DiagOfScm => scm.diag(),
        SigmaInit::Explicit(v) => v.clone(),
        SigmaInit::SeededRandom => {
            let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
            let diag = scm.diag();
            DVector::from_iterator(
                scm.n(),
                diag.iter().map(|&d| rng.random_range(0.1..2.0) * d.abs().max(1e-12)),
            )
        }
    }
}

/// Relative-decrease stopping rule; the denominator is guarded for
/// non-positive loss values, for which the raw rule is ill-defined.
fn relative_decrease(prev: f64, cur: f64) -> f64 {
    let denom = if cur > 0.0 { cur } else { cur.abs().max(1.0) };
    (prev - cur) / denom
}

/// FAAN: coordinate descent on the Gaussian loss, alternating a truncated
/// eigendecomposition in whitened coordinates with Gauss-Seidel sweeps of
/// per-coordinate noise updates.
pub fn faan_fit(req: &FitRequest) -> Result<FactorFit> {
    req.validate()?;
    let scm = &req.scm;
    let n = scm.n();
    let r = req.rank;
    let cfg = &req.config;
    if !scm.has_positive_diagonal() {
        return Err(Error::NonPositiveDiagonal);
    }

    let init_sq = initial_sigma_sq(scm, cfg);
    if init_sq.iter().any(|&v| v <= 0.0) {
        return Err(Error::NonPositiveSigma);
    }
    // the noise updates operate on standard deviations
    let mut sigma: DVector<f64> = init_sq.map(f64::sqrt);

    let mut loss_trace = Vec::with_capacity(cfg.max_iter + 1);
    let f_init = gaussian_loss(scm, &DMatrix::zeros(n, n), &init_sq)?;
    loss_trace.push(f_init);

    let mut u = DMatrix::zeros(n, r);
    let mut lambda = DVector::zeros(r);
    let mut converged = false;
    let mut iterations = 0;
    let mut f_prev = f_init;
    let rhat = scm.entries();

    for _ in 0..cfg.max_iter {
        iterations += 1;

        // step (a): eigen-step in whitened coordinates
        let sigma_sq = sigma.map(|s| s * s);
        let rt = whiten(scm, &sigma_sq)?;
        let (mu, vecs) = sym_eig_desc(&rt);
        for k in 0..r {
            lambda[k] = (mu[k] - 1.0).max(0.0);
        }
        u.copy_from(&vecs.columns(0, r).into_owned());

        // Gamma = (I + U Lambda U^T)^{-1} = I - U diag(lambda/(1+lambda)) U^T
        let shrink = DVector::from_iterator(r, (0..r).map(|k| lambda[k] / (1.0 + lambda[k])));
        let gamma = DMatrix::identity(n, n) - &u * DMatrix::from_diagonal(&shrink) * u.transpose();

        // step (b): Gauss-Seidel noise sweeps, updated sigma_i used for i < k
        for _ in 0..cfg.inner_sigma_sweeps {
            for k in 0..n {
                let mut b = 0.0;
                for i in 0..n {
                    if i != k {
                        b += rhat[(i, k)] * gamma[(i, k)] / sigma[i];
                    }
                }
                let c = rhat[(k, k)] * gamma[(k, k)];
                let root = (b + (b * b + 4.0 * c).sqrt()) / 2.0;
                #[cfg(debug_assertions)]
                {
                    // second-order condition at the accepted root
                    let curvature = -root * root + 2.0 * b * root + 3.0 * c;
                    debug_assert!(
                        curvature >= -1e-9 * (root * root).max(1.0),
                        "noise update is not a minimum (curvature {curvature})"
                    );
                }
                sigma[k] = root;
            }
        }

        let sigma_sq = sigma.map(|s| s * s);
        let sst = reconstruct_sst(&u, &lambda, &sigma);
        let f = gaussian_loss(scm, &sst, &sigma_sq)?;
        loss_trace.push(f);
        if relative_decrease(f_prev, f) <= cfg.epsilon {
            converged = true;
            break;
        }
        f_prev = f;
    }

    let sigma_sq = sigma.map(|s| s * s);
    let sst = reconstruct_sst(&u, &lambda, &sigma);
    Ok(FactorFit {
        method: Method::Faan,
        rank: r,
        u,
        lambda,
        sigma_sq,
        sst,
        loss_trace,
        iterations,
        converged,
        feasible: true,
        eigen_selection_mismatch: false,
    })
}

/// `Sigma^{1/2} U Lambda U^T Sigma^{1/2}` for diagonal `Sigma` given as
/// standard deviations.
fn reconstruct_sst(u: &DMatrix<f64>, lambda: &DVector<f64>, sigma: &DVector<f64>) -> DMatrix<f64> {
    let n = u.nrows();
    let inner = u * DMatrix::from_diagonal(lambda) * u.transpose();
    let mut out = inner;
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] *= sigma[i] * sigma[j];
        }
    }
    // exact symmetry despite floating-point products
    let sym = (&out + out.transpose()) * 0.5;
    sym
}

/// Original Frobenius-norm alternating minimization. May converge to
/// infeasible points (negative noise variances or indefinite low-rank part);
/// this is reported through the `feasible` flag, never raised.
pub fn fnmo_fit(req: &FitRequest) -> Result<FactorFit> {
    frobenius_alternation(req, false)
}

/// Frobenius-norm alternating minimization with the noise update clamped to
/// nonnegative diagonal entries.
pub fn fnm_fit(req: &FitRequest) -> Result<FactorFit> {
    frobenius_alternation(req, true)
}

fn frobenius_alternation(req: &FitRequest, clamp: bool) -> Result<FactorFit> {
    req.validate()?;
    let scm = &req.scm;
    let n = scm.n();
    let r = req.rank;
    let cfg = &req.config;

    let mut sigma_sq = initial_sigma_sq(scm, cfg);
    let mut loss_trace = Vec::with_capacity(cfg.max_iter);
    let mut converged = false;
    let mut iterations = 0;
    let mut g_prev = f64::INFINITY;
    let mut u = DMatrix::zeros(n, r);
    let mut kept = DVector::zeros(r);
    let mut sst = DMatrix::zeros(n, n);
    let mut eigen_selection_mismatch = false;
    let scale = scm.entries().norm();

    for _ in 0..cfg.max_iter {
        iterations += 1;
        let mut work = scm.entries().clone();
        for k in 0..n {
            work[(k, k)] -= sigma_sq[k];
        }
        // rank-r truncation keeping the algebraically largest eigenvalues
        let (e, vecs) = sym_eig_desc(&work);
        for k in 0..r {
            kept[k] = e[k];
        }
        u.copy_from(&vecs.columns(0, r).into_owned());
        sst = &u * DMatrix::from_diagonal(&kept) * u.transpose();
        sst = (&sst + sst.transpose()) * 0.5;
        // magnitude-based selection would have kept a discarded negative eigenvalue
        if e[n - 1].abs() > kept[r - 1].abs() {
            eigen_selection_mismatch = true;
        }

        let resid_diag = scm.diag() - sst.diagonal();
        sigma_sq = if clamp {
            resid_diag.map(|v| v.max(0.0))
        } else {
            resid_diag
        };

        let g = frobenius_loss(scm, &sst, &sigma_sq)?;
        loss_trace.push(g);
        if g <= 1e-12 * scale {
            converged = true;
            break;
        }
        if relative_decrease(g_prev, g) <= cfg.epsilon {
            converged = true;
            break;
        }
        g_prev = g;
    }

    let tol = 1e-10 * scale.max(1.0);
    let sst_psd = kept.iter().all(|&e| e >= -tol);
    let sigma_ok = sigma_sq.iter().all(|&v| v >= -tol);
    Ok(FactorFit {
        method: if clamp { Method::Fnm } else { Method::FnmO },
        rank: r,
        u,
        lambda: kept,
        sigma_sq,
        sst,
        loss_trace,
        iterations,
        converged,
        feasible: sst_psd && sigma_ok,
        eigen_selection_mismatch,
    })
}

/// Closed-form ML estimate under isotropic noise `Sigma = sigma^2 I`:
/// the noise variance is the average of the trailing eigenvalues of the SCM.
pub fn isotropic_ml(scm: &SampleCov, r: usize) -> Result<FactorFit> {
    let n = scm.n();
    if r < 1 || r >= n {
        return Err(Error::InvalidInput(format!(
            "rank must satisfy 1 <= r < n (r = {r}, n = {n})"
        )));
    }
    if !scm.has_positive_diagonal() {
        return Err(Error::NonPositiveDiagonal);
    }
    let (rho, vecs) = sym_eig_desc(scm.entries());
    if rho[n - 1] <= 0.0 {
        return Err(Error::SingularMatrix);
    }
    let sigma2 = rho.rows(r, n - r).sum() / (n - r) as f64;
    let u = vecs.columns(0, r).into_owned();
    let lambda = DVector::from_iterator(r, (0..r).map(|k| rho[k] / sigma2 - 1.0));
    // ssT = sigma^2 U Lambda U^T = U diag(rho_k - sigma^2) U^T
    let scaled = DVector::from_iterator(r, (0..r).map(|k| rho[k] - sigma2));
    let sst = &u * DMatrix::from_diagonal(&scaled) * u.transpose();
    let sst = (&sst + sst.transpose()) * 0.5;
    let sigma_sq = DVector::from_element(n, sigma2);
    let loss = gaussian_loss(scm, &sst, &sigma_sq)?;
    Ok(FactorFit {
        method: Method::Isotropic,
        rank: r,
        u,
        lambda,
        sigma_sq,
        sst,
        loss_trace: vec![loss],
        iterations: 1,
        converged: true,
        feasible: true,
        eigen_selection_mismatch: false,
    })
}
