//! Two-sided diagonal rescaling of subdomain matrices into the range of a
//! target format, and the matching right-hand-side pipeline.
//!
//! A subdomain system `A_i u_i = f_i` is mapped to `𝒜_i v̂_i = b̂_i` with
//! `𝒜_i = μ D_r A_i D_c`, `b_i = D_r f_i` and `b̂_i = ν̂ μ b_i / ‖b_i‖∞`.
//! The solution is recovered as `u_i = (‖b_i‖∞ / ν̂) D_c v̂_i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpsim::{FloatFormat, FormatKind};
use crate::linalg::SparseMatrix;

/// Default headroom factor for the matrix, `μ = ν x_max`.
pub const DEFAULT_NU: f64 = 0.1;
/// Default headroom factor for the right-hand side.
pub const DEFAULT_NU_HAT: f64 = 0.1;

const MAX_SYMMETRIC_SWEEPS: usize = 100;

/// The scaling applied to one subdomain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingData {
    pub d_r: Vec<f64>,
    pub d_c: Vec<f64>,
    pub mu: f64,
    pub nu: f64,
    pub nu_hat: f64,
    pub symmetric: bool,
}

impl ScalingData {
    /// No scaling: `D_r = D_c = I`, `μ = 1`, `ν̂ = 1`.
    pub fn identity(n: usize) -> Self {
        ScalingData { d_r: vec![1.0; n], d_c: vec![1.0; n], mu: 1.0, nu: 1.0, nu_hat: 1.0, symmetric: true }
    }

    pub fn with_nu_hat(mut self, nu_hat: f64) -> Self {
        self.nu_hat = nu_hat;
        self
    }

    pub fn n(&self) -> usize {
        self.d_r.len()
    }

    /// Condition number `max(d) / min(d)` of the column scaling.
    pub fn kappa_dc(&self) -> f64 {
        let (lo, hi) = self.d_c.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        hi / lo
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_nu(nu: f64) -> Result<()> {
    if nu > 0.0 && nu <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("headroom factor must lie in (0, 1], got {nu}")))
    }
}

/// Range target `μ`: a fraction of `x_max` for binary formats, 1 for decimal
/// formats which carry no range limit.
fn target_mu(fmt: &FloatFormat, nu: f64) -> f64 {
    match fmt.kind() {
        FormatKind::Binary => nu * fmt.x_max(),
        FormatKind::Decimal => 1.0,
    }
}

/// Row-then-column max-norm equilibration.
pub fn scale_general(a: &SparseMatrix, fmt: &FloatFormat, nu: f64) -> Result<(ScalingData, SparseMatrix)> {
    check_nu(nu)?;
    let n = a.n();
    let mut d_r = vec![0.0; n];
    for (i, d) in d_r.iter_mut().enumerate() {
        let m = a.row(i).1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m == 0.0 {
            return Err(Error::ZeroRow(i));
        }
        *d = 1.0 / m;
    }
    let mut col_max = vec![0.0f64; n];
    for (i, j, v) in a.iter() {
        col_max[j] = col_max[j].max((d_r[i] * v).abs());
    }
    let mut d_c = vec![0.0; n];
    for (j, (d, &m)) in d_c.iter_mut().zip(&col_max).enumerate() {
        if m == 0.0 {
            return Err(Error::ZeroColumn(j));
        }
        *d = 1.0 / m;
    }
    let mu = target_mu(fmt, nu);
    let scaled = a.map_entries(|i, j, v| mu * ((d_r[i] * v) * d_c[j]));
    let sd = ScalingData { d_r, d_c, mu, nu, nu_hat: DEFAULT_NU_HAT, symmetric: false };
    Ok((sd, scaled))
}

/// Symmetric equilibration `𝒜 = μ D A D`.
///
/// When every diagonal entry dominates its row (`a_ii ≥ |a_ij|`) a single
/// step with `D = diag(a_ii^{-1/2})` already gives a unit diagonal. In that
/// case `μ` is rounded down to a power of two times `x_max`, so `μ` itself is
/// representable and the scaled diagonal is set to exactly `μ`. Otherwise an
/// alternating symmetric max-norm iteration runs until every row maximum
/// lies in `[1/2, 1]`.
pub fn scale_symmetric(a: &SparseMatrix, fmt: &FloatFormat, nu: f64) -> Result<(ScalingData, SparseMatrix)> {
    check_nu(nu)?;
    if !a.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let n = a.n();
    let diag = a.diagonal();
    let dominant = (0..n).all(|i| {
        let (_, vals) = a.row(i);
        diag[i] > 0.0 && vals.iter().all(|v| v.abs() <= diag[i])
    });
    let mu = match fmt.kind() {
        FormatKind::Binary => 2f64.powi(nu.log2().floor() as i32) * fmt.x_max(),
        FormatKind::Decimal => 1.0,
    };
    if dominant {
        let d: Vec<f64> = diag.iter().map(|&v| 1.0 / v.sqrt()).collect();
        let scaled = a.map_entries(|i, j, v| if i == j { mu } else { mu * ((d[i] * d[j]) * v) });
        let sd = ScalingData { d_r: d.clone(), d_c: d, mu, nu, nu_hat: DEFAULT_NU_HAT, symmetric: true };
        return Ok((sd, scaled));
    }
    if let Some(i) = (0..n).find(|&i| a.row(i).1.iter().all(|&v| v == 0.0)) {
        return Err(Error::ZeroRow(i));
    }
    let mut d = vec![1.0; n];
    for _ in 0..MAX_SYMMETRIC_SWEEPS {
        let mut row_max = vec![0.0f64; n];
        for (i, j, v) in a.iter() {
            row_max[i] = row_max[i].max(((d[i] * d[j]) * v).abs());
        }
        if row_max.iter().all(|&m| (0.5..=1.0).contains(&m)) {
            break;
        }
        for (di, m) in d.iter_mut().zip(&row_max) {
            *di /= m.sqrt();
        }
    }
    // Final normalization so that no entry exceeds one.
    let top = a.iter().fold(0.0f64, |m, (i, j, v)| m.max(((d[i] * d[j]) * v).abs()));
    if top > 1.0 {
        // Slightly below 1/√top so that rounding cannot push an entry past one.
        let s = (1.0 - 4.0 * f64::EPSILON) / top.sqrt();
        d.iter_mut().for_each(|x| *x *= s);
    }
    let scaled = a.map_entries(|i, j, v| mu * ((d[i] * d[j]) * v));
    let sd = ScalingData { d_r: d.clone(), d_c: d, mu, nu, nu_hat: DEFAULT_NU_HAT, symmetric: true };
    Ok((sd, scaled))
}

/// Scales a subdomain right-hand side.
///
/// Returns `(b̂, ‖D_r f‖∞)`. A zero right-hand side yields a zero `b̂` and a
/// zero norm; callers short-circuit to a zero solution.
pub fn scale_rhs(f: &[f64], sd: &ScalingData) -> Result<(Vec<f64>, f64)> {
    if f.len() != sd.n() {
        return Err(Error::DimensionMismatch { expected: sd.n(), got: f.len() });
    }
    let b: Vec<f64> = f.iter().zip(&sd.d_r).map(|(x, d)| d * x).collect();
    let nb = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if nb == 0.0 {
        return Ok((b, 0.0));
    }
    // Normalize first: `ν̂ μ / ‖b‖` alone can overflow when μ is near x_max.
    let c = sd.nu_hat * sd.mu;
    Ok((b.into_iter().map(|v| c * (v / nb)).collect(), nb))
}

/// Recovers `u = (‖b‖∞ / ν̂) D_c v̂`.
pub fn unscale_solution(v_hat: &[f64], sd: &ScalingData, b_norm: f64) -> Vec<f64> {
    let c = b_norm / sd.nu_hat;
    v_hat.iter().zip(&sd.d_c).map(|(v, d)| c * (d * v)).collect()
}
