//! Randomized property tests for the covariance-model primitives.

use faan::covmodel::{clamp_plus, diag_part, diag_zero, gaussian_loss, whiten, SampleCov};
use faan::fixtures;
use faan::linalg::sym_inv_sqrt;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spd_from(seed: u64, n: usize) -> DMatrix<f64> {
    fixtures::random_spd(n, seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Whitening is exactly undone by the sigma square roots:
    /// `D R~ D = R_hat` for `D = diag(sigma)`.
    #[test]
    fn whiten_round_trip(seed in 0u64..10_000, n in 2usize..8) {
        let scm = SampleCov::from_matrix(spd_from(seed, n)).unwrap();
        let sigma_sq = DVector::from_fn(n, |k, _| 0.1 + 0.9 * ((seed + k as u64) % 7) as f64);
        let rt = whiten(&scm, &sigma_sq).unwrap();
        let d = DMatrix::from_diagonal(&sigma_sq.map(f64::sqrt));
        let back = &d * rt * &d;
        prop_assert!((back - scm.entries()).norm() < 1e-10 * scm.entries().norm());
    }

    /// The inverse square root used for whitening satisfies
    /// `(A^{-1/2})^2 A = I` on SPD input.
    #[test]
    fn inv_sqrt_inverts(seed in 0u64..10_000, n in 2usize..7) {
        let a = spd_from(seed, n);
        let is = sym_inv_sqrt(&a).unwrap();
        let ident = &is * &is * &a;
        prop_assert!((ident - DMatrix::identity(n, n)).norm() < 1e-8);
    }

    /// Diagonal/off-diagonal decomposition: diag_part + diag_zero = original,
    /// and clamping never produces negative diagonal entries.
    #[test]
    fn diag_split_and_clamp(seed in 0u64..10_000, n in 2usize..8) {
        let m = fixtures::random_symmetric(n, seed);
        let rebuilt = diag_part(&m).unwrap() + diag_zero(&m).unwrap();
        prop_assert!((rebuilt - &m).norm() == 0.0);
        let c = clamp_plus(&diag_part(&m).unwrap()).unwrap();
        for k in 0..n {
            prop_assert!(c[(k, k)] >= 0.0);
            prop_assert!(c[(k, k)] == m[(k, k)].max(0.0));
        }
    }
}

/// The Gaussian covariance-fitting loss is uniquely minimized when the model
/// equals the sample covariance; random SPD perturbations never do better.
#[test]
fn gaussian_loss_minimized_at_sample_covariance() {
    for seed in 0..20u64 {
        let n = 5;
        let scm = SampleCov::from_matrix(spd_from(seed, n)).unwrap();
        // evaluate with the model set exactly to the SCM (as the "low-rank"
        // part plus a vanishing diagonal) versus perturbed SPD models
        let sigma_tiny = DVector::from_element(n, 1e-12);
        let base = gaussian_loss(
            &scm,
            &(scm.entries() - DMatrix::from_diagonal(&sigma_tiny)),
            &sigma_tiny,
        )
        .unwrap();
        for pseed in 0..20u64 {
            let pert = spd_from(7_000 + 31 * seed + pseed, n) * 0.3;
            let model = scm.entries() + &pert;
            let loss = gaussian_loss(&scm, &(model - DMatrix::from_diagonal(&sigma_tiny)), &sigma_tiny)
                .unwrap();
            assert!(
                loss >= base - 1e-9,
                "seed ({seed},{pseed}): perturbed loss {loss} below {base}"
            );
        }
    }
}
