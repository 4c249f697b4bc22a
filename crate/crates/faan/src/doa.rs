//! Array-processing application: synthetic uniform-linear-array data,
//! real-valued MUSIC pseudospectra, and the Monte-Carlo RMSE harness.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bounds::resolvable_sources;
use crate::covmodel::{FactorFit, SampleCov};
use crate::error::{Error, Result};
use crate::linalg::{sym_eig_desc, sym_inv_sqrt};

/// Default MUSIC search grid step over `[0, 0.5)`.
pub const DEFAULT_GRID_STEP: f64 = 1e-4;

/// Minimum index separation between two reported peaks, in grid steps.
pub const PEAK_EXCLUSION_STEPS: usize = 10;

/// A simulated uniform-linear-array scenario.
#[derive(Debug, Clone)]
pub struct ArrayScenario {
    pub n: usize,
    pub freqs: Vec<f64>,
    pub n_snapshots: usize,
    /// Per-sensor noise variances before SNR rescaling.
    pub noise_var: Vec<f64>,
    pub snr_db: f64,
    pub seed: u64,
}

impl ArrayScenario {
    pub fn new(
        n: usize,
        freqs: Vec<f64>,
        n_snapshots: usize,
        noise_var: Vec<f64>,
        snr_db: f64,
        seed: u64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("need at least 2 sensors".into()));
        }
        let m = freqs.len();
        if m == 0 {
            return Err(Error::InvalidInput("need at least one source".into()));
        }
        for (i, &f) in freqs.iter().enumerate() {
            if !(0.0..0.5).contains(&f) {
                return Err(Error::InvalidInput(format!("frequency {f} outside [0, 0.5)")));
            }
            for &g in &freqs[i + 1..] {
                if (f - g).abs() < 1e-12 {
                    return Err(Error::InvalidInput("frequencies must be distinct".into()));
                }
            }
        }
        if 2 * m >= n {
            return Err(Error::InvalidInput(format!("require 2m < n (m = {m}, n = {n})")));
        }
        if m > resolvable_sources(n, true) {
            return Err(Error::InvalidInput(format!(
                "{m} sources exceed the anisotropic resolvability limit {} at n = {n}",
                resolvable_sources(n, true)
            )));
        }
        if noise_var.len() != n || noise_var.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidInput("noise_var must be n strictly positive values".into()));
        }
        if n_snapshots == 0 {
            return Err(Error::InvalidInput("need at least one snapshot".into()));
        }
        Ok(Self { n, freqs, n_snapshots, noise_var, snr_db, seed })
    }

    /// The scenario of the reference experiments: 15 sensors, sources at
    /// 0.2 and 0.25, noise variances uniform on (0, 1) per seed.
    pub fn standard_two_source(n_snapshots: usize, snr_db: f64, seed: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
        let noise_var: Vec<f64> = (0..15).map(|_| rng.random_range(1e-6..1.0)).collect();
        Self::new(15, vec![0.2, 0.25], n_snapshots, noise_var, snr_db, seed)
            .expect("standard scenario is valid")
    }

    /// Factor rank of the real-valued model, `2m`.
    pub fn rank(&self) -> usize {
        2 * self.freqs.len()
    }
}

/// MUSIC output: the pseudospectrum over the grid plus the selected peaks.
#[derive(Debug, Clone)]
pub struct MusicResult {
    pub grid: Vec<f64>,
    pub spectrum: Vec<f64>,
    /// `m` estimated frequencies, sorted ascending.
    pub peaks: Vec<f64>,
}

/// Real steering matrix: columns alternate `cos(2 pi f_k j)` and
/// `sin(2 pi f_k j)` over sensor index `j = 0..n-1`.
pub fn steering_matrix_real(freqs: &[f64], n: usize) -> Result<DMatrix<f64>> {
    if freqs.is_empty() {
        return Err(Error::InvalidInput("empty frequency list".into()));
    }
    if n < 1 {
        return Err(Error::InvalidInput("need at least one sensor".into()));
    }
    let m = freqs.len();
    let mut a = DMatrix::zeros(n, 2 * m);
    for (k, &f) in freqs.iter().enumerate() {
        for j in 0..n {
            let phase = 2.0 * std::f64::consts::PI * f * j as f64;
            a[(j, 2 * k)] = phase.cos();
            a[(j, 2 * k + 1)] = phase.sin();
        }
    }
    Ok(a)
}

/// Noise variances rescaled by a single scalar so that
/// `10 log10(Tr(A A^T) / sum sigma_k^2)` equals `snr_db` exactly.
pub fn scaled_noise_var(scn: &ArrayScenario) -> Result<DVector<f64>> {
    let a = steering_matrix_real(&scn.freqs, scn.n)?;
    let signal_power = (&a * a.transpose()).trace();
    let target_sum = signal_power / 10f64.powf(scn.snr_db / 10.0);
    let current: f64 = scn.noise_var.iter().sum();
    let scale = target_sum / current;
    Ok(DVector::from_iterator(scn.n, scn.noise_var.iter().map(|&v| v * scale)))
}

/// Simulates `y_t = A s_t + e_t` with standard-normal factors and
/// anisotropic Gaussian noise meeting the scenario SNR exactly.
/// Deterministic per seed.
pub fn simulate_array(scn: &ArrayScenario) -> Result<DMatrix<f64>> {
    let a = steering_matrix_real(&scn.freqs, scn.n)?;
    let sigma_sq = scaled_noise_var(scn)?;
    let sigma: Vec<f64> = sigma_sq.iter().map(|v| v.sqrt()).collect();
    let r = scn.rank();
    let mut rng = ChaCha12Rng::seed_from_u64(scn.seed);
    let mut data = DMatrix::zeros(scn.n, scn.n_snapshots);
    for t in 0..scn.n_snapshots {
        let s = DVector::from_fn(r, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let mut y = &a * s;
        for k in 0..scn.n {
            let e: f64 = StandardNormal.sample(&mut rng);
            y[k] += sigma[k] * e;
        }
        data.set_column(t, &y);
    }
    Ok(data)
}

/// The exact model covariance `A A^T + Sigma` of a scenario.
pub fn model_covariance(scn: &ArrayScenario) -> Result<DMatrix<f64>> {
    let a = steering_matrix_real(&scn.freqs, scn.n)?;
    let sigma_sq = scaled_noise_var(scn)?;
    let mut r = &a * a.transpose();
    for k in 0..scn.n {
        r[(k, k)] += sigma_sq[k];
    }
    Ok((&r + r.transpose()) * 0.5)
}

fn spectrum_from_projector(t: &DMatrix<f64>, n: usize, grid_step: f64, m: usize) -> Result<MusicResult> {
    if !(grid_step > 0.0 && grid_step < 0.5) {
        return Err(Error::InvalidInput("grid_step must be in (0, 0.5)".into()));
    }
    let len = (0.5 / grid_step).ceil() as usize;
    let mut grid = Vec::with_capacity(len);
    let mut spectrum = Vec::with_capacity(len);
    for i in 0..len {
        let f = i as f64 * grid_step;
        if f >= 0.5 {
            break;
        }
        let a = steering_matrix_real(&[f], n)?;
        let proj = t * a;
        grid.push(f);
        spectrum.push(proj.norm());
    }
    let peaks = pick_peaks(&grid, &spectrum, m)?;
    Ok(MusicResult { grid, spectrum, peaks })
}

/// Local maxima of the spectrum, tallest first, with an exclusion radius of
/// [`PEAK_EXCLUSION_STEPS`] grid steps so one lobe cannot yield two peaks.
fn pick_peaks(grid: &[f64], spectrum: &[f64], m: usize) -> Result<Vec<f64>> {
    let len = spectrum.len();
    if len < 3 {
        return Err(Error::InvalidInput("grid too coarse for peak picking".into()));
    }
    let mut candidates: Vec<usize> = Vec::new();
    for i in 0..len {
        let left_ok = i == 0 || spectrum[i] >= spectrum[i - 1];
        let right_ok = i == len - 1 || spectrum[i] > spectrum[i + 1];
        if left_ok && right_ok {
            candidates.push(i);
        }
    }
    candidates.sort_by(|&a, &b| spectrum[b].partial_cmp(&spectrum[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    for &idx in &candidates {
        if chosen.iter().all(|&c| c.abs_diff(idx) > PEAK_EXCLUSION_STEPS) {
            chosen.push(idx);
            if chosen.len() == m {
                break;
            }
        }
    }
    if chosen.len() < m {
        return Err(Error::InvalidInput(format!(
            "found only {} separated peaks, need {m}",
            chosen.len()
        )));
    }
    let mut peaks: Vec<f64> = chosen.into_iter().map(|i| grid[i]).collect();
    peaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(peaks)
}

/// MUSIC pseudospectrum built from a factor-model fit: the fitted basis is
/// `S = Sigma^{1/2} U Lambda^{1/2}` and the spectrum is
/// `||(S^T S)^{-1/2} S^T a(f)||`.
pub fn music_faan(fit: &FactorFit, grid_step: f64, m: usize) -> Result<MusicResult> {
    if fit.rank != 2 * m {
        return Err(Error::InvalidInput(format!(
            "fit rank {} does not match 2m = {}",
            fit.rank,
            2 * m
        )));
    }
    let n = fit.sst.nrows();
    let r = fit.rank;
    let active = fit.lambda.iter().filter(|&&l| l > 0.0).count();
    if active < r {
        return Err(Error::RankDeficientBasis { active, required: r });
    }
    // S = Sigma^{1/2} U Lambda^{1/2}
    let mut s = DMatrix::zeros(n, r);
    for i in 0..n {
        let sd = fit.sigma_sq[i].sqrt();
        for k in 0..r {
            s[(i, k)] = sd * fit.u[(i, k)] * fit.lambda[k].sqrt();
        }
    }
    let gram = s.transpose() * &s;
    let gram = (&gram + gram.transpose()) * 0.5;
    let inv_sqrt = sym_inv_sqrt(&gram).map_err(|_| Error::RankDeficientBasis { active, required: r })?;
    let t = inv_sqrt * s.transpose();
    spectrum_from_projector(&t, n, grid_step, m)
}

/// MUSIC pseudospectrum from the whitened SCM: the signal subspace is the
/// `2m` principal eigenvectors of `Sigma^{-1/2} R_hat Sigma^{-1/2}` and the
/// spectrum is `||U_s^T Sigma^{-1/2} a(f)||`. With unit `sigma_sq` this is
/// the vanilla MUSIC baseline on the raw SCM.
pub fn music_whitened(
    scm: &SampleCov,
    sigma_sq: &DVector<f64>,
    m: usize,
    grid_step: f64,
) -> Result<MusicResult> {
    let n = scm.n();
    if sigma_sq.len() != n {
        return Err(Error::InvalidInput("sigma_sq length mismatch".into()));
    }
    if sigma_sq.iter().any(|&v| v <= 0.0) {
        return Err(Error::NonPositiveSigma);
    }
    if 2 * m > n {
        return Err(Error::InvalidInput("2m must not exceed n".into()));
    }
    let rt = crate::covmodel::whiten(scm, sigma_sq)?;
    let (_, vecs) = sym_eig_desc(&rt);
    let u_s = vecs.columns(0, 2 * m).into_owned();
    let inv_std = DMatrix::from_diagonal(&sigma_sq.map(|v| 1.0 / v.sqrt()));
    let t = u_s.transpose() * inv_std;
    spectrum_from_projector(&t, n, grid_step, m)
}

/// Average over sources of the per-source root-mean-square frequency error,
/// with optimal per-trial assignment between estimates and truth.
pub fn rmse(estimates: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::InvalidInput("no trials".into()));
    }
    let m = truth.len();
    let mut sq_sums = vec![0.0f64; m];
    for (t, est) in estimates.iter().enumerate() {
        if est.len() != m {
            return Err(Error::InvalidInput(format!(
                "trial {t} has {} estimates, expected {m}",
                est.len()
            )));
        }
        let assignment = best_assignment(est, truth);
        for k in 0..m {
            let err = est[assignment[k]] - truth[k];
            sq_sums[k] += err * err;
        }
    }
    let trials = estimates.len() as f64;
    Ok(sq_sums.iter().map(|&s| (s / trials).sqrt()).sum::<f64>() / m as f64)
}

/// Brute-force minimum-total-squared-error matching of estimates to truth
/// (source counts are small).
fn best_assignment(est: &[f64], truth: &[f64]) -> Vec<usize> {
    let m = truth.len();
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best: Vec<usize> = perm.clone();
    let mut best_cost = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let cost: f64 = (0..m).map(|k| (est[p[k]] - truth[k]).powi(2)).sum();
        if cost < best_cost {
            best_cost = cost;
            best = p.to_vec();
        }
    });
    best
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}
