//! Working-precision linear algebra.

mod dense;
mod lu;
mod mm;
mod mmatrix;
mod sparse;

pub use dense::{
    dense_inverse, dense_norms, lanczos_extremes, norms, spectral_radius_dense, symmetric_extremes_dense,
    two_norm_dense, DenseCap, LanczosEstimate, Norms,
};
#[allow(unused_imports)]
pub(crate) use dense::{dot, l2};
pub use lu::{lu_factor, lu_factor_in, solve, LuFactors};
pub use mm::{read_matrix_market, write_matrix_market};
pub use mmatrix::{is_m_matrix, CheckMode, MMatrixReport};
pub use sparse::SparseMatrix;

/// `tridiag(lower, diag, upper)` of size `n`.
pub fn tridiag(n: usize, lower: f64, diag: f64, upper: f64) -> SparseMatrix {
    let mut t = Vec::with_capacity(3 * n);
    for i in 0..n {
        if i > 0 {
            t.push((i, i - 1, lower));
        }
        t.push((i, i, diag));
        if i + 1 < n {
            t.push((i, i + 1, upper));
        }
    }
    SparseMatrix::from_triplets(n, t).expect("valid tridiagonal")
}

/// Relative 2-norm distance `‖a - b‖ / ‖b‖` (absolute when `b = 0`).
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let nb = l2(b);
    if nb == 0.0 {
        d
    } else {
        d / nb
    }
}
