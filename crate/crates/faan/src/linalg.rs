//! Deterministic dense symmetric eigendecomposition helpers.
//!
//! All eigendecompositions in this crate go through [`sym_eig_desc`] so that
//! eigenvalue ordering and eigenvector signs are bit-reproducible across runs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric eigendecomposition with strict descending eigenvalue order
/// (index-based tie-breaking) and a fixed sign convention: the
/// largest-magnitude component of each eigenvector is made positive.
pub fn sym_eig_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    debug_assert_eq!(n, m.ncols());
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps the original index order on ties
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let col = eig.eigenvectors.column(src);
        // first strictly-largest magnitude entry fixes the sign
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, dst)] = sign * col[i];
        }
    }
    (values, vectors)
}

/// Inverse symmetric square root of an SPD matrix.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eig_desc(m);
    let n = m.nrows();
    let scale = values[0].abs().max(1.0);
    let mut d = DVector::zeros(n);
    for i in 0..n {
        if values[i] <= scale * 1e-14 {
            return Err(Error::SingularMatrix);
        }
        d[i] = 1.0 / values[i].sqrt();
    }
    Ok(&vectors * DMatrix::from_diagonal(&d) * vectors.transpose())
}
