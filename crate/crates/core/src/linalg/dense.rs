use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::SparseMatrix;
use crate::error::{Error, Result};

/// Upper bound on the dimension for which dense O(n³) work is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenseCap(pub usize);

impl Default for DenseCap {
    fn default() -> Self {
        DenseCap(3000)
    }
}

impl DenseCap {
    pub fn check(&self, n: usize) -> Result<()> {
        if n > self.0 {
            Err(Error::CapExceeded { n, cap: self.0 })
        } else {
            Ok(())
        }
    }
}

pub fn dense_inverse(m: &DMatrix<f64>, cap: DenseCap) -> Result<DMatrix<f64>> {
    cap.check(m.nrows())?;
    m.clone().lu().try_inverse().ok_or(Error::Singular { column: 0 })
}

/// Largest eigenvalue magnitude of a general dense matrix.
///
/// Uses faer's Hessenberg QR, which deflates with an absolute fallback and
/// exceptional shifts. Schwarz iteration matrices carry large clusters of
/// zero eigenvalues on which a purely relative deflation test stalls.
pub fn spectral_radius_dense(m: &DMatrix<f64>, cap: DenseCap) -> Result<f64> {
    let n = m.nrows();
    cap.check(n)?;
    if n == 0 {
        return Ok(0.0);
    }
    let f = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    let eig = f.eigenvalues().map_err(|_| Error::EigenNoConvergence)?;
    Ok(eig.iter().fold(0.0, |r, z| r.max(z.norm())))
}

/// Exact 2-norm from the largest singular value.
pub fn two_norm_dense(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Extremal eigenvalues `(λ_min, λ_max)` of a symmetric dense matrix.
///
/// Only eigenvalues are computed, which is several times cheaper than the
/// full decomposition at subdomain sizes.
pub fn symmetric_extremes_dense(m: &DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    if n == 0 {
        return (0.0, 0.0);
    }
    let f = faer::Mat::<f64>::from_fn(n, n, |i, j| m[(i, j)]);
    match f.self_adjoint_eigenvalues(faer::Side::Lower) {
        Ok(e) => e.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x))),
        Err(_) => {
            let e = m.clone().symmetric_eigenvalues();
            (e.min(), e.max())
        }
    }
}

/// Matrix norms; the 2-norm is estimated by power iteration on `MᵀM`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub two_norm_est: f64,
    pub two_norm_converged: bool,
    pub one_norm: f64,
    pub inf_norm: f64,
    pub frobenius: f64,
}

pub fn norms(m: &SparseMatrix) -> Norms {
    let n = m.n();
    let mut col = vec![0.0; n];
    let mut row = vec![0.0; n];
    let mut fro = 0.0;
    for (i, j, v) in m.iter() {
        row[i] += v.abs();
        col[j] += v.abs();
        fro += v * v;
    }
    let (two, conv) = power_two_norm(n, |x| m.matvec(x), |x| m.matvec_transpose(x));
    Norms {
        two_norm_est: two,
        two_norm_converged: conv,
        one_norm: col.iter().cloned().fold(0.0, f64::max),
        inf_norm: row.iter().cloned().fold(0.0, f64::max),
        frobenius: fro.sqrt(),
    }
}

pub fn dense_norms(m: &DMatrix<f64>) -> Norms {
    let one = (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let inf = (0..m.nrows()).map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let (two, conv) = power_two_norm(
        m.ncols(),
        |x| (m * DVector::from_column_slice(x)).as_slice().to_vec(),
        |x| (m.tr_mul(&DVector::from_column_slice(x))).as_slice().to_vec(),
    );
    Norms { two_norm_est: two, two_norm_converged: conv, one_norm: one, inf_norm: inf, frobenius: m.norm() }
}

fn power_two_norm(
    n: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    apply_t: impl Fn(&[f64]) -> Vec<f64>,
) -> (f64, bool) {
    if n == 0 {
        return (0.0, true);
    }
    // Deterministic start with all components present.
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 101) as f64 / 101.0).collect();
    let nx = l2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut sigma = 0.0;
    for _ in 0..1000 {
        let y = apply(&x);
        // Rayleigh quotient of xᵀMᵀMx: quadratic accuracy in the vector error.
        let new_sigma = l2(&y);
        let z = apply_t(&y);
        let nz = l2(&z);
        if nz == 0.0 {
            return (0.0, true);
        }
        x = z.into_iter().map(|v| v / nz).collect();
        if (new_sigma - sigma).abs() <= 1e-10 * new_sigma {
            return (new_sigma, true);
        }
        sigma = new_sigma;
    }
    (sigma, false)
}

pub(crate) fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Result of a Lanczos extremal-eigenvalue estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosEstimate {
    pub min: f64,
    pub max: f64,
    pub converged: bool,
}

/// Extremal eigenvalues of a symmetric operator by Lanczos with full
/// reorthogonalization. Convergence means both Ritz residuals are below
/// `tol` relative to the spectral scale.
pub fn lanczos_extremes(
    n: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
    max_steps: usize,
    tol: f64,
) -> LanczosEstimate {
    let steps = max_steps.min(n).max(1);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 2654435761usize) % 1000) as f64 / 1000.0).collect();
    let nv = l2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut est = LanczosEstimate { min: 0.0, max: 0.0, converged: false };
    for k in 0..steps {
        q.push(v.clone());
        let mut w = apply(&v);
        let a = dot(&w, &v);
        alpha.push(a);
        // Full reorthogonalization (twice for stability).
        for _ in 0..2 {
            for qj in &q {
                let c = dot(&w, qj);
                w.iter_mut().zip(qj).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let b = l2(&w);
        let t = tridiagonal(&alpha, &beta);
        let eig = SymmetricEigen::new(t);
        let (imin, imax) = argminmax(eig.eigenvalues.as_slice());
        let last = k;
        let rmin = (b * eig.eigenvectors[(last, imin)]).abs();
        let rmax = (b * eig.eigenvectors[(last, imax)]).abs();
        let lo = eig.eigenvalues[imin];
        let hi = eig.eigenvalues[imax];
        let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        est = LanczosEstimate { min: lo, max: hi, converged: rmin <= tol * scale && rmax <= tol * scale };
        if est.converged || b <= 1e-14 * scale || k + 1 == steps {
            if b <= 1e-14 * scale || k + 1 == n {
                est.converged = true;
            }
            break;
        }
        beta.push(b);
        v = w.into_iter().map(|x| x / b).collect();
    }
    est
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let k = alpha.len();
    let mut t = DMatrix::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alpha[i];
        if i + 1 < k {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

fn argminmax(x: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (i, &v) in x.iter().enumerate() {
        if v < x[lo] {
            lo = i;
        }
        if v > x[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
