//! Shared test fixtures and seeded generators for sample covariance inputs.
//!
//! These are used by the unit and acceptance suites and by benchmarking
//! scripts; they are deterministic per seed.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::covmodel::SampleCov;

/// The 6x6 sample covariance on which the original Frobenius alternation is
/// known to converge to an indefinite noise estimate at rank 2.
pub fn demo_scm_6x6() -> SampleCov {
    let m = DMatrix::from_row_slice(
        6,
        6,
        &[
            1.0973, -0.2093, 0.9481, -1.4471, 1.7815, -0.7927, //
            -0.2093, 4.4978, 0.4230, 4.4947, -1.7959, 3.2707, //
            0.9481, 0.4230, 3.5566, 0.1260, 0.5104, -2.3557, //
            -1.4471, 4.4947, 0.1260, 7.5986, -3.0046, 1.4273, //
            1.7815, -1.7959, 0.5104, -3.0046, 6.8526, -2.9834, //
            -0.7927, 3.2707, -2.3557, 1.4273, -2.9834, 7.9070,
        ],
    );
    SampleCov::from_matrix(m).expect("fixture is symmetric")
}

/// The 5x5 sample covariance used to exercise monotone likelihood descent at
/// rank 3 (fixed-point ML iterations are known to oscillate on it).
pub fn demo_scm_5x5() -> SampleCov {
    let m = DMatrix::from_row_slice(
        5,
        5,
        &[
            5.9022, 3.2245, 7.3856, 4.7320, 4.7804, //
            3.2245, 2.1207, 3.9317, 2.5892, 1.6077, //
            7.3856, 3.9317, 9.3943, 5.9126, 5.6763, //
            4.7320, 2.5892, 5.9126, 3.9139, 3.6792, //
            4.7804, 1.6077, 5.6763, 3.6792, 10.4673,
        ],
    );
    SampleCov::from_matrix(m).expect("fixture is symmetric")
}

/// SCM of `n_samples` i.i.d. standard-normal vectors of dimension `n`.
pub fn random_spd_scm(n: usize, n_samples: usize, seed: u64) -> SampleCov {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let data = DMatrix::from_fn(n, n_samples, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    crate::covmodel::sample_covariance(&data, false).expect("finite data")
}

/// A random symmetric matrix with standard-normal entries (not definite).
pub fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    (&a + a.transpose()) * 0.5
}

/// A well-conditioned random SPD matrix.
pub fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.1
}

/// An exactly decomposable covariance `R = S S^T + Sigma` with known parts.
/// Returns `(SampleCov, ssT_true, sigma_sq_true)`.
pub fn exact_decomposition(n: usize, r: usize, seed: u64) -> (SampleCov, DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let s = DMatrix::from_fn(n, r, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
    let sst = &s * s.transpose();
    let sst = (&sst + sst.transpose()) * 0.5;
    let sigma_sq = DVector::from_fn(n, |_, _| rng.random_range(0.5..1.5));
    let mut m = sst.clone();
    for k in 0..n {
        m[(k, k)] += sigma_sq[k];
    }
    (SampleCov::from_matrix(m).expect("constructed symmetric"), sst, sigma_sq)
}
