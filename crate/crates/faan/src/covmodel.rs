//! Core covariance-model types and the loss/transform primitives shared by
//! every solver.
//!
//! The model is `R = S S^T + Sigma` with `S S^T` low rank and `Sigma` a
//! positive diagonal noise matrix. All solvers consume a [`SampleCov`] and
//! produce a [`FactorFit`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative asymmetry beyond which an input matrix is rejected instead of
/// symmetrized.
pub const MAX_REL_ASYMMETRY: f64 = 1e-8;

/// A symmetric sample second-moment matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCov {
    entries: DMatrix<f64>,
}

impl SampleCov {
    /// Ingests a square matrix, symmetrizing via `(M + M^T)/2`. Rejects
    /// non-square, non-finite, or grossly asymmetric input.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "expected a nonempty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
        let asym = (&m - m.transpose()).iter().fold(0.0f64, |acc, v| acc.max(v.abs())) / scale;
        if asym > MAX_REL_ASYMMETRY {
            return Err(Error::Asymmetric(asym));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self { entries: sym })
    }

    /// Dimension `n`.
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn diag(&self) -> DVector<f64> {
        self.entries.diagonal()
    }

    /// True if every diagonal entry is strictly positive (required before
    /// any likelihood-based fit).
    pub fn has_positive_diagonal(&self) -> bool {
        self.entries.diagonal().iter().all(|&d| d > 0.0)
    }
}

/// Sample covariance `(1/N) sum_t y_t y_t^T` of an `n x N` data matrix
/// (columns are observations). With `center` set, the column mean is
/// subtracted first.
pub fn sample_covariance(data: &DMatrix<f64>, center: bool) -> Result<SampleCov> {
    let (n, num) = (data.nrows(), data.ncols());
    if n == 0 || num == 0 {
        return Err(Error::InvalidInput("empty data matrix".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut scm = DMatrix::zeros(n, n);
    if center {
        let mean = data.column_mean();
        for t in 0..num {
            let d = data.column(t) - &mean;
            scm += &d * d.transpose();
        }
    } else {
        for t in 0..num {
            let y = data.column(t);
            scm += &y * y.transpose();
        }
    }
    scm /= num as f64;
    SampleCov::from_matrix(scm)
}

/// Gaussian covariance-fitting loss `Tr(R_hat R^{-1}) + ln|R|` with
/// `R = ssT + diag(sigma_sq)`.
pub fn gaussian_loss(scm: &SampleCov, sst: &DMatrix<f64>, sigma_sq: &DVector<f64>) -> Result<f64> {
    let n = scm.n();
    if sst.nrows() != n || sst.ncols() != n || sigma_sq.len() != n {
        return Err(Error::InvalidInput("dimension mismatch in gaussian_loss".into()));
    }
    let mut r = sst.clone();
    for k in 0..n {
        r[(k, k)] += sigma_sq[k];
    }
    let chol = r.cholesky().ok_or(Error::SingularModel)?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let r_inv = chol.inverse();
    let trace = scm
        .entries()
        .iter()
        .zip(r_inv.iter())
        .map(|(a, b)| a * b)
        .sum::<f64>();
    Ok(trace + log_det)
}

/// Frobenius residual `||R_hat - ssT - diag(sigma_sq)||_F`.
pub fn frobenius_loss(scm: &SampleCov, sst: &DMatrix<f64>, sigma_sq: &DVector<f64>) -> Result<f64> {
    let n = scm.n();
    if sst.nrows() != n || sst.ncols() != n || sigma_sq.len() != n {
        return Err(Error::InvalidInput("dimension mismatch in frobenius_loss".into()));
    }
    let mut resid = scm.entries() - sst;
    for k in 0..n {
        resid[(k, k)] -= sigma_sq[k];
    }
    Ok(resid.norm())
}

/// Keeps the diagonal of a square matrix and zeroes everything else.
pub fn diag_part(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_square(m)?;
    Ok(DMatrix::from_diagonal(&m.diagonal()))
}

/// Zeroes the diagonal of a square matrix, keeping the off-diagonal part.
pub fn diag_zero(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_square(m)?;
    let mut out = m.clone();
    for k in 0..m.nrows() {
        out[(k, k)] = 0.0;
    }
    Ok(out)
}

/// Replaces negative diagonal entries with zeros, keeping positive ones.
pub fn clamp_plus(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    require_square(m)?;
    let mut out = m.clone();
    for k in 0..m.nrows() {
        if out[(k, k)] < 0.0 {
            out[(k, k)] = 0.0;
        }
    }
    Ok(out)
}

fn require_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidInput(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// The congruence `Sigma^{-1/2} R_hat Sigma^{-1/2}` for diagonal `Sigma`
/// given as a vector of variances.
pub fn whiten(scm: &SampleCov, sigma_sq: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = scm.n();
    if sigma_sq.len() != n {
        return Err(Error::InvalidInput("sigma_sq length mismatch".into()));
    }
    if sigma_sq.iter().any(|&v| v <= 0.0) {
        return Err(Error::NonPositiveSigma);
    }
    let inv_std: Vec<f64> = sigma_sq.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut out = scm.entries().clone();
    for i in 0..n {
        for j in 0..n {
            out[(i, j)] *= inv_std[i] * inv_std[j];
        }
    }
    Ok(out)
}

/// Fitting method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Faan,
    Fnm,
    FnmO,
    Isotropic,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Faan => "faan",
            Method::Fnm => "fnm",
            Method::FnmO => "fnm_o",
            Method::Isotropic => "isotropic",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "faan" => Ok(Method::Faan),
            "fnm" => Ok(Method::Fnm),
            "fnm_o" | "fnmo" => Ok(Method::FnmO),
            "isotropic" => Ok(Method::Isotropic),
            other => Err(Error::InvalidInput(format!("unknown method `{other}`"))),
        }
    }
}

/// Initialization policy for the diagonal noise estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaInit {
    Identity,
    /// `diag(R_hat)`; scale-equivariant, the default.
    DiagOfScm,
    /// Explicit vector of variances.
    Explicit(DVector<f64>),
    /// Seeded random variances, drawn as `uniform(0.1, 2.0) * R_hat_kk`.
    SeededRandom,
}

impl Default for SigmaInit {
    fn default() -> Self {
        SigmaInit::DiagOfScm
    }
}

/// Stopping and initialization knobs shared by the iterative solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Relative-loss stopping tolerance.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Number of Gauss-Seidel noise sweeps per outer iteration.
    pub inner_sigma_sweeps: usize,
    pub sigma_init: SigmaInit,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            max_iter: 1000,
            inner_sigma_sweeps: 3,
            sigma_init: SigmaInit::DiagOfScm,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be > 0".into()));
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidInput("max_iter must be >= 1".into()));
        }
        if self.inner_sigma_sweeps < 1 {
            return Err(Error::InvalidInput("inner_sigma_sweeps must be >= 1".into()));
        }
        if let SigmaInit::Explicit(v) = &self.sigma_init {
            if v.iter().any(|&x| x <= 0.0) {
                return Err(Error::InvalidInput(
                    "explicit sigma initialization must be strictly positive".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Estimated `(U, Lambda, Sigma)` triple plus the reconstructed low-rank part
/// and convergence diagnostics.
///
/// For likelihood fits (`faan`, `isotropic`) the basis lives in whitened
/// coordinates: `ssT = Sigma^{1/2} U Lambda U^T Sigma^{1/2}`. For the
/// Frobenius fits (`fnm`, `fnm_o`) `U` and `lambda` are the eigenpairs of the
/// truncated update, so `ssT = U Lambda U^T`; infeasible `fnm_o` fits may
/// carry negative `lambda` entries together with `feasible = false`.
#[derive(Debug, Clone)]
pub struct FactorFit {
    pub method: Method,
    pub rank: usize,
    /// `n x r` with orthonormal columns.
    pub u: DMatrix<f64>,
    /// `r` eigenvalues, descending.
    pub lambda: DVector<f64>,
    /// Noise variances. Always positive for `faan`/`isotropic`; may contain
    /// negative entries for `fnm_o` (reported via `feasible`).
    pub sigma_sq: DVector<f64>,
    /// Reconstructed low-rank part.
    pub sst: DMatrix<f64>,
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub feasible: bool,
    /// Set when the algebraically-largest-eigenvalue truncation of the
    /// Frobenius step differs from the best rank-r approximation by
    /// magnitude (large negative eigenvalues were discarded).
    pub eigen_selection_mismatch: bool,
}

impl FactorFit {
    /// The fitted covariance `ssT + diag(sigma_sq)`.
    pub fn fitted_cov(&self) -> DMatrix<f64> {
        let mut r = self.sst.clone();
        for k in 0..self.sigma_sq.len() {
            r[(k, k)] += self.sigma_sq[k];
        }
        r
    }

    /// Smallest fitted noise variance (near zero indicates a Heywood-type
    /// boundary solution).
    pub fn min_sigma_sq(&self) -> f64 {
        self.sigma_sq.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Final loss value of the trace.
    pub fn final_loss(&self) -> f64 {
        *self.loss_trace.last().expect("loss trace is never empty")
    }
}
