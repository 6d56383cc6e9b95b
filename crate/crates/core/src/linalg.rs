//! Thin wrappers around dense factorizations. Sizes stay at desk scale
//! (<= 2048), so everything is full dense LU/SVD/eigendecomposition.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

/// Relative threshold below which a matrix counts as numerically singular:
/// smallest singular value < `SINGULARITY_RATIO` x largest.
pub const SINGULARITY_RATIO: f64 = 1e-12;

/// Singular values sorted descending.
pub fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).expect("singular values are finite"));
    sv
}

/// (largest, smallest) singular value.
pub fn svd_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let sv = singular_values_desc(m);
    (sv[0], sv[sv.len() - 1])
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    svd_extremes(m).0
}

/// Smallest eigenvalue of the symmetrized part `(M + M^T)/2`.
pub fn sym_min_eig(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Eigenvalues of the symmetrized part, sorted descending.
pub fn sym_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.partial_cmp(a).expect("eigenvalues are finite"));
    ev
}

/// LU solve with partial pivoting; `None` when the factorization breaks down.
pub fn lu_solve(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    m.clone().lu().solve(rhs)
}

/// Solve `M X = D` for a diagonal right-hand side given by `diag`.
pub fn lu_solve_diag_rhs(m: &DMatrix<f64>, diag: &[f64]) -> Option<DMatrix<f64>> {
    let n = m.nrows();
    debug_assert_eq!(diag.len(), n);
    let rhs = DMatrix::from_fn(n, n, |r, c| if r == c { diag[r] } else { 0.0 });
    m.clone().lu().solve(&rhs)
}
