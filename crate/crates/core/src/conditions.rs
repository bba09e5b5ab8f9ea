//! Verifiers for the sufficient convergence conditions of the
//! multiprecision Schwarz methods.
//!
//! For a rounded subdomain `(𝒜, 𝒜̃ = 𝒜 + F)` the M-matrix theory needs
//!
//! * the norm condition `‖𝒜⁻¹F‖ < 1`,
//! * the entrywise condition `𝒜⁻¹ ≥ 𝒜⁻¹ F 𝒜⁻¹`,
//!
//! which together with `F ≥ 0` give a weak regular splitting
//! (`𝒜̃⁻¹ ≥ 0`, `𝒜̃⁻¹F ≥ 0`). The symmetric theory needs `𝒜̃ ≻ 0` and
//! `λ_min(𝒜) ≥ 2|λ₋∞(F)|`, where `λ₋∞(F) = min(λ_min(F), 0)`.
//!
//! All quantities are invariant under a common positive scaling of `𝒜` and
//! `F`, so both are divided by `max|𝒜|` first. This keeps dense inverses out
//! of the subnormal range when `𝒜` has been scaled close to `x_max`.
//!
//! Dense checks are gated by a [`DenseCap`]; above it only the norm
//! condition is computed (1-norm and Frobenius norm, column by column) and
//! every other verdict is reported as skipped.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    dense_inverse, lanczos_extremes, lu_factor, symmetric_extremes_dense, two_norm_dense, DenseCap, SparseMatrix,
};
use crate::rounding::RoundedSubdomain;
use crate::schwarz::SchwarzOperator;

/// Relative tolerance for entrywise nonnegativity tests.
pub const TAU_NEG: f64 = 1e-12;
/// Relative slack for the Weyl inequality.
pub const WEYL_TOL: f64 = 1e-9;
const LANCZOS_TOL: f64 = 1e-8;
const LANCZOS_STEPS: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    Two,
    One,
    Frobenius,
}

/// A verdict that was either computed or explicitly skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Check<T> {
    Checked(T),
    Skipped { reason: String },
}

impl<T> Check<T> {
    fn cap(n: usize, cap: DenseCap) -> Self {
        Check::Skipped { reason: format!("cap exceeded: n = {n} > {}", cap.0) }
    }

    pub fn checked(&self) -> Option<&T> {
        match self {
            Check::Checked(t) => Some(t),
            Check::Skipped { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormCondition {
    /// `‖𝒜⁻¹F‖₂`, available at or below the dense cap.
    pub two: Option<f64>,
    pub one: f64,
    pub frobenius: f64,
    pub used: NormKind,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntrywiseCondition {
    /// `max(0, -min(𝒜⁻¹ - 𝒜⁻¹F𝒜⁻¹)) / max|𝒜⁻¹|`.
    pub max_violation: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdCondition {
    /// Eigenvalues below are those of the normalized matrices `𝒜 / max|𝒜|`.
    pub lambda_min_scaled: f64,
    pub lambda_min_rounded: f64,
    pub lambda_min_f: f64,
    /// `min(λ_min(F), 0)`.
    pub lambda_neg_inf: f64,
    /// `𝒜̃ ≻ 0`.
    pub pd_passed: bool,
    /// `λ_min(𝒜̃) ≥ |λ₋∞(F)|`.
    pub direct_passed: bool,
    /// `λ_min(𝒜) ≥ 2|λ₋∞(F)|`.
    pub eig_passed: bool,
    /// `λ_min(𝒜̃) ≥ λ_min(𝒜) + λ_min(F)` up to [`WEYL_TOL`].
    pub weyl_holds: bool,
    /// Eigenvalues came from Lanczos rather than a dense eigensolve.
    pub estimated: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdomainConditions {
    pub subdomain: usize,
    pub size: usize,
    pub norm_condition: NormCondition,
    pub entrywise_condition: Check<EntrywiseCondition>,
    pub nonneg_inverse: Check<bool>,
    pub weak_regular: Check<bool>,
    pub spd: Check<SpdCondition>,
}

impl SubdomainConditions {
    /// Norm and entrywise conditions both verified.
    pub fn certified(&self) -> bool {
        self.norm_condition.passed && matches!(self.entrywise_condition, Check::Checked(EntrywiseCondition { passed: true, .. }))
    }

    /// Positive definiteness and the sufficient eigenvalue condition verified.
    pub fn certified_spd(&self) -> bool {
        matches!(self.spd, Check::Checked(SpdCondition { pd_passed: true, eig_passed: true, .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub format: String,
    pub cap: usize,
    pub subdomains: Vec<SubdomainConditions>,
}

impl ConditionReport {
    pub fn certified(&self) -> bool {
        self.subdomains.iter().all(|s| s.certified())
    }

    pub fn certified_spd(&self) -> bool {
        self.subdomains.iter().all(|s| s.certified_spd())
    }

    pub fn norm_passed(&self) -> bool {
        self.subdomains.iter().all(|s| s.norm_condition.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `𝒜`, `𝒜̃` and `F` divided by `max|𝒜|`.
struct Normalized {
    a: SparseMatrix,
    a_tilde: SparseMatrix,
    f: SparseMatrix,
}

fn normalize(sub: &RoundedSubdomain) -> Normalized {
    let s = sub.a_scaled.max_abs();
    let s = if s > 0.0 { 1.0 / s } else { 1.0 };
    Normalized { a: sub.a_scaled.scale(s), a_tilde: sub.a_rounded.scale(s), f: sub.f.scale(s) }
}

/// `‖𝒜⁻¹F‖`, solving only against the nonzero columns of `F`.
pub fn check_norm_condition(sub: &RoundedSubdomain, norm: NormKind, cap: DenseCap) -> Result<NormCondition> {
    let m = normalize(sub);
    let n = m.a.n();
    let lu = lu_factor(&m.a)?;
    let ft = m.f.transpose();
    let dense = cap.check(n).is_ok();
    let mut x = if dense { DMatrix::zeros(n, n) } else { DMatrix::zeros(0, 0) };
    let mut one = 0.0f64;
    let mut fro2 = 0.0;
    let mut col = vec![0.0; n];
    for j in 0..n {
        let (rows, vals) = ft.row(j);
        if vals.iter().all(|&v| v == 0.0) {
            continue;
        }
        col.iter_mut().for_each(|c| *c = 0.0);
        for (&i, &v) in rows.iter().zip(vals) {
            col[i] = v;
        }
        let xj = lu.solve(&col)?;
        one = one.max(xj.iter().map(|v| v.abs()).sum());
        fro2 += xj.iter().map(|v| v * v).sum::<f64>();
        if dense {
            x.column_mut(j).copy_from_slice(&xj);
        }
    }
    let two = dense.then(|| two_norm_dense(&x));
    let frobenius = fro2.sqrt();
    let (used, value) = match (norm, two) {
        (NormKind::Two, Some(t)) => (NormKind::Two, t),
        (NormKind::Frobenius, _) => (NormKind::Frobenius, frobenius),
        _ => (NormKind::One, one),
    };
    Ok(NormCondition { two, one, frobenius, used, value, passed: value < 1.0 })
}

fn entrywise_dense(a_inv: &DMatrix<f64>, f: &DMatrix<f64>) -> EntrywiseCondition {
    let rhs = a_inv * f * a_inv;
    let diff = a_inv - rhs;
    let scale = a_inv.amax().max(f64::MIN_POSITIVE);
    let max_violation = (-diff.min()).max(0.0) / scale;
    EntrywiseCondition { max_violation, passed: max_violation <= TAU_NEG }
}

/// `𝒜⁻¹ ≥ 𝒜⁻¹F𝒜⁻¹` entrywise (dense, cap-gated).
pub fn check_entrywise_condition(sub: &RoundedSubdomain, cap: DenseCap) -> Result<Check<EntrywiseCondition>> {
    let n = sub.a_scaled.n();
    if cap.check(n).is_err() {
        return Ok(Check::cap(n, cap));
    }
    let m = normalize(sub);
    let a_inv = dense_inverse(&m.a.to_dense(), cap)?;
    Ok(Check::Checked(entrywise_dense(&a_inv, &m.f.to_dense())))
}

fn nonneg(m: &DMatrix<f64>, scale: f64) -> bool {
    m.min() >= -TAU_NEG * scale
}

/// Weak regular splitting test on explicit dense matrices: `Ã⁻¹ ≥ 0` and
/// `Ã⁻¹(Ã - A) ≥ 0`.
pub fn weak_regular_dense(a: &DMatrix<f64>, a_tilde: &DMatrix<f64>, cap: DenseCap) -> Result<bool> {
    let inv = dense_inverse(a_tilde, cap)?;
    let prod = &inv * (a_tilde - a);
    Ok(nonneg(&inv, inv.amax()) && nonneg(&prod, prod.amax().max(inv.amax() * a.amax() * f64::EPSILON)))
}

/// `𝒜̃⁻¹ ≥ 0` and `𝒜̃⁻¹F ≥ 0` (dense, cap-gated).
pub fn check_weak_regular(sub: &RoundedSubdomain, cap: DenseCap) -> Result<Check<bool>> {
    let n = sub.a_scaled.n();
    if cap.check(n).is_err() {
        return Ok(Check::cap(n, cap));
    }
    let m = normalize(sub);
    Ok(Check::Checked(weak_regular_dense(&m.a.to_dense(), &m.a_tilde.to_dense(), cap)?))
}

/// `𝒜⁻¹ ≥ 0` (dense, cap-gated).
pub fn check_nonneg_inverse(sub: &RoundedSubdomain, cap: DenseCap) -> Result<Check<bool>> {
    let n = sub.a_scaled.n();
    if cap.check(n).is_err() {
        return Ok(Check::cap(n, cap));
    }
    let inv = dense_inverse(&normalize(sub).a.to_dense(), cap)?;
    Ok(Check::Checked(nonneg(&inv, inv.amax())))
}

fn extremes(m: &SparseMatrix, dense: bool) -> (f64, f64, bool) {
    if dense {
        let (lo, hi) = symmetric_extremes_dense(&m.to_dense());
        (lo, hi, true)
    } else {
        let e = lanczos_extremes(m.n(), |x| m.matvec(x), LANCZOS_STEPS, LANCZOS_TOL);
        (e.min, e.max, e.converged)
    }
}

/// Positive definiteness and eigenvalue conditions for symmetric
/// subdomains. Dense eigensolves at or below the cap, Lanczos above.
pub fn check_spd_conditions(sub: &RoundedSubdomain, cap: DenseCap) -> Result<SpdCondition> {
    if !sub.a_scaled.is_symmetric() || !sub.a_rounded.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let m = normalize(sub);
    let dense = cap.check(m.a.n()).is_ok();
    let (la, ha, ca) = extremes(&m.a, dense);
    let (lt, ht, ct) = extremes(&m.a_tilde, dense);
    let (lf, hf, cf) = if m.f.values().iter().all(|&v| v == 0.0) { (0.0, 0.0, true) } else { extremes(&m.f, dense) };
    let neg_inf = lf.min(0.0);
    let scale = ha.abs().max(ht.abs()).max(hf.abs()).max(la.abs());
    Ok(SpdCondition {
        lambda_min_scaled: la,
        lambda_min_rounded: lt,
        lambda_min_f: lf,
        lambda_neg_inf: neg_inf,
        pd_passed: lt > 0.0,
        direct_passed: lt > 0.0 && lt >= neg_inf.abs(),
        eig_passed: la >= 2.0 * neg_inf.abs(),
        weyl_holds: lt >= la + lf - WEYL_TOL * scale,
        estimated: !dense,
        converged: ca && ct && cf,
    })
}

/// Every check for one rounded subdomain.
pub fn check_subdomain(sub: &RoundedSubdomain, index: usize, cap: DenseCap) -> Result<SubdomainConditions> {
    let n = sub.a_scaled.n();
    let norm = if cap.check(n).is_ok() { NormKind::Two } else { NormKind::One };
    let spd = if sub.a_scaled.is_symmetric() && sub.a_rounded.is_symmetric() {
        Check::Checked(check_spd_conditions(sub, cap)?)
    } else {
        Check::Skipped { reason: "not symmetric".into() }
    };
    Ok(SubdomainConditions {
        subdomain: index,
        size: n,
        norm_condition: check_norm_condition(sub, norm, cap)?,
        entrywise_condition: check_entrywise_condition(sub, cap)?,
        nonneg_inverse: check_nonneg_inverse(sub, cap)?,
        weak_regular: check_weak_regular(sub, cap)?,
        spd,
    })
}

/// Checks all subdomains of an operator concurrently.
pub fn check_operator(op: &SchwarzOperator, cap: DenseCap) -> Result<ConditionReport> {
    let subdomains = op
        .subdomains
        .par_iter()
        .enumerate()
        .map(|(i, s)| check_subdomain(&s.rounded, i, cap).map_err(|e| e.in_subdomain(i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport { format: op.config.solve_fmt.name(), cap: cap.0, subdomains })
}
