//! Left-preconditioned GMRES without restarts.
//!
//! Arnoldi runs on `v ↦ M⁻¹Av` with modified Gram-Schmidt and the small
//! least-squares problem is updated by Givens rotations, so the
//! preconditioned residual norm is available at every step for free.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::schwarz::SchwarzOperator;

/// Anything that can apply `M⁻¹` to a vector.
pub trait Preconditioner {
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>>;
}

impl Preconditioner for SchwarzOperator {
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.apply_preconditioner(v)
    }
}

/// `M = I`.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(v.to_vec())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmresConfig {
    /// Preconditioned relative residual tolerance.
    pub tol: f64,
    pub max_iters: usize,
    /// Second Gram-Schmidt pass.
    pub reorth: bool,
}

impl Default for GmresConfig {
    fn default() -> Self {
        GmresConfig { tol: 1e-12, max_iters: 100, reorth: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmresResult {
    pub x: Vec<f64>,
    /// Preconditioned relative residuals, starting with 1 at iteration 0.
    pub residual_history: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    /// Unpreconditioned relative residual of the returned `x`.
    pub true_residual: f64,
}

impl GmresResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,prec_rel_residual\n");
        for (k, r) in self.residual_history.iter().enumerate() {
            s.push_str(&format!("{k},{r:e}\n"));
        }
        s
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `‖f - Ax‖₂ / ‖f‖₂`; zero right-hand sides give the absolute residual.
pub fn residual_check(x: &[f64], a: &SparseMatrix, f: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r: f64 = f.iter().zip(&ax).map(|(fi, ai)| (fi - ai).powi(2)).sum::<f64>().sqrt();
    let nf = norm(f);
    if nf > 0.0 {
        r / nf
    } else {
        r
    }
}

/// Solves `M⁻¹Ax = M⁻¹f` from a zero initial guess.
pub fn gmres_solve<P: Preconditioner + ?Sized>(
    a: &SparseMatrix,
    precond: &P,
    f: &[f64],
    cfg: &GmresConfig,
) -> Result<GmresResult> {
    let n = a.n();
    if f.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.len() });
    }
    if !(cfg.tol > 0.0) || cfg.max_iters == 0 {
        return Err(Error::InvalidArgument("GMRES needs tol > 0 and max_iters >= 1".into()));
    }
    let r0 = precond.apply(f)?;
    let beta = norm(&r0);
    let mut history = vec![1.0];
    if beta == 0.0 {
        return Ok(GmresResult { x: vec![0.0; n], residual_history: history, iters: 0, converged: true, true_residual: residual_check(&vec![0.0; n], a, f) });
    }
    let m = cfg.max_iters;
    let mut v: Vec<Vec<f64>> = vec![r0.iter().map(|x| x / beta).collect()];
    // Columns of the rotated Hessenberg matrix.
    let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut cs: Vec<(f64, f64)> = Vec::with_capacity(m);
    let mut g = vec![beta];
    let mut converged = false;
    let mut k = 0;
    while k < m {
        let mut w = precond.apply(&a.matvec(&v[k]))?;
        let mut col = vec![0.0; k + 2];
        let passes = if cfg.reorth { 2 } else { 1 };
        for _ in 0..passes {
            for (j, vj) in v.iter().enumerate() {
                let c = dot(&w, vj);
                col[j] += c;
                w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= c * vi);
            }
        }
        let hn = norm(&w);
        col[k + 1] = hn;
        for (j, &(c, s)) in cs.iter().enumerate() {
            let (a0, a1) = (col[j], col[j + 1]);
            col[j] = c * a0 + s * a1;
            col[j + 1] = -s * a0 + c * a1;
        }
        let r = col[k].hypot(col[k + 1]);
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (col[k] / r, col[k + 1] / r) };
        col[k] = r;
        col[k + 1] = 0.0;
        cs.push((c, s));
        g.push(-s * g[k]);
        g[k] *= c;
        h.push(col);
        k += 1;
        let rel = g[k].abs() / beta;
        history.push(rel);
        let breakdown = hn <= 1e-14 * beta.max(f64::MIN_POSITIVE) || hn == 0.0;
        if rel <= cfg.tol || breakdown {
            converged = true;
            break;
        }
        v.push(w.into_iter().map(|x| x / hn).collect());
    }
    // Back substitution on the k × k upper-triangular system.
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[j][i] * y[j];
        }
        y[i] = s / h[i][i];
    }
    let mut x = vec![0.0; n];
    for (yj, vj) in y.iter().zip(&v) {
        x.iter_mut().zip(vj).for_each(|(xi, vi)| *xi += yj * vi);
    }
    let true_residual = residual_check(&x, a, f);
    Ok(GmresResult { x, residual_history: history, iters: k, converged, true_residual })
}
