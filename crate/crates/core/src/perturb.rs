//! Perturbation analysis of multiprecision Schwarz preconditioners.
//!
//! With `X_i = 𝒜_i⁻¹F_i` the rounded subdomain solve satisfies
//! `Ã_i⁻¹ = (I + ℰ_i) A_i⁻¹` where `ℰ_i = D_c((I + X_i)⁻¹ - I)D_c⁻¹`.
//! The preconditioned operator then splits as `M̃⁻¹A = M⁻¹A + E` and for the
//! additive variants
//!
//! ```text
//! E = θ Σ_i R_iᵀ ℰ_i A_i⁻¹ R_i A        (R̄_iᵀ for RAS)
//! ```
//!
//! For two-subdomain multiplicative Schwarz, with `P_i = R_iᵀA_i⁻¹R_iA` and
//! `Q_i = R_iᵀℰ_iA_i⁻¹R_iA`, the error is `E = G₁ + G₂ + G₃` with
//! `G₁ = (I - P₂)Q₁`, `G₂ = Q₂(I - P₁)` and `G₃ = -Q₂Q₁`.
//!
//! Everything here is dense and meant for small analysis problems.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dense_inverse, two_norm_dense, DenseCap};
use crate::schwarz::{SchwarzOperator, ScaledSubdomain, SolveMode, Variant};

/// Default dimension limit for the dense analysis.
pub const PERTURB_CAP: DenseCap = DenseCap(400);

/// Per-subdomain error data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubdomainPerturbation {
    pub subdomain: usize,
    /// `ε_i = ‖𝒜_i⁻¹F_i‖₂`.
    pub epsilon: f64,
    /// `‖ℰ_i‖₂`.
    pub cal_e_norm: f64,
    pub kappa_dc: f64,
    /// `2 ε_i κ(D_c)`, meaningful when `ε_i < 1/2`.
    pub cal_e_bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MsNorms {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    /// `‖G₁ + G₂ + G₃ - E‖₂ / max(‖E‖₂, 1)`.
    pub sum_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbReport {
    pub variant: Variant,
    pub format: String,
    pub subdomains: Vec<SubdomainPerturbation>,
    pub epsilon: f64,
    pub kappa_dc: f64,
    /// `‖E‖₂` from column probing.
    pub e_norm2: f64,
    /// `‖E‖₂` from the per-subdomain formula, for additive variants. It has
    /// no cancellation, so it stays exact when every `F_i` vanishes.
    pub e_formula_norm2: Option<f64>,
    pub e_frobenius: f64,
    /// `‖M⁻¹A‖₂` of the full-precision method.
    pub precond_norm2: f64,
    /// `2 ε κ(D_c) ‖M⁻¹A‖₂`, evaluated only when `ε < 1/2`.
    pub bound: Option<f64>,
    /// Compares the bound with the formula norm. The probed norm is the
    /// difference of two computed operators and carries roundoff of order
    /// `u₆₄‖M⁻¹A‖` even when `E` is exactly zero.
    pub bound_holds: Option<bool>,
    /// `‖E_probed - E_formula‖₂ / max(‖E_probed‖₂, 1)` for additive variants.
    pub formula_residual: Option<f64>,
    pub ms: Option<MsNorms>,
    /// Common relative rounding error if every `F_i` is a multiple of `𝒜_i`.
    pub tau: Option<f64>,
}

impl PerturbReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `ℰ_i` and `ε_i` for one subdomain.
///
/// `𝒜` and `F` are divided by `max|𝒜|` first; `X = 𝒜⁻¹F` is unchanged.
pub fn subdomain_error_matrix(sub: &ScaledSubdomain, cap: DenseCap) -> Result<(DMatrix<f64>, f64)> {
    let r = &sub.rounded;
    let n = r.a_scaled.n();
    cap.check(n)?;
    let s = r.a_scaled.max_abs();
    let s = if s > 0.0 { 1.0 / s } else { 1.0 };
    let a = r.a_scaled.scale(s).to_dense();
    let f = r.f.scale(s).to_dense();
    let lu = a.lu();
    let x = lu.solve(&f).ok_or(Error::Singular { column: 0 })?;
    let epsilon = two_norm_dense(&x);
    // (I + X)⁻¹ - I = -(I + X)⁻¹ X, which avoids cancellation for small X.
    let ipx = DMatrix::identity(n, n) + &x;
    let inner = -ipx.lu().solve(&x).ok_or(Error::Singular { column: 0 })?;
    let d = &sub.scaling.d_c;
    let e = DMatrix::from_fn(n, n, |i, j| d[i] * inner[(i, j)] / d[j]);
    Ok((e, epsilon))
}

fn check_pair(full: &SchwarzOperator, mp: &SchwarzOperator, cap: DenseCap) -> Result<()> {
    cap.check(full.size())?;
    if full.config.variant != mp.config.variant
        || full.partition.sets != mp.partition.sets
        || full.config.damping() != mp.config.damping()
        || full.a != mp.a
    {
        return Err(Error::InvalidArgument("full and multiprecision operators must share matrix, partition and method".into()));
    }
    for op in [full, mp] {
        if op.config.solve_mode != SolveMode::RoundedMatrixExactSolve {
            return Err(Error::InvalidArgument("perturbation analysis needs exact solves with the rounded matrix".into()));
        }
    }
    Ok(())
}

/// `E = M̃⁻¹A - M⁻¹A = T - T̃`, by probing both iteration matrices.
pub fn assemble_e_probed(full: &SchwarzOperator, mp: &SchwarzOperator, cap: DenseCap) -> Result<DMatrix<f64>> {
    check_pair(full, mp, cap)?;
    Ok(full.assemble_dense_iteration_matrix(cap)? - mp.assemble_dense_iteration_matrix(cap)?)
}

/// Dense `A_i⁻¹ R_i A` (an `|W_i| × N` block).
fn local_solve_block(op: &SchwarzOperator, a: &DMatrix<f64>, i: usize, cap: DenseCap) -> Result<DMatrix<f64>> {
    let set = &op.partition.sets[i];
    let a_inv = dense_inverse(&op.subdomains[i].a_i.to_dense(), cap)?;
    let rows = a.select_rows(set.iter());
    Ok(a_inv * rows)
}

/// `R_iᵀ B` (or `R̄_iᵀ B`) as a full `N × N` matrix.
fn prolong_block(op: &SchwarzOperator, i: usize, b: &DMatrix<f64>, restricted: bool) -> DMatrix<f64> {
    let n = op.size();
    let set = &op.partition.sets[i];
    let owned = &op.partition.owned[i];
    let mut out = DMatrix::zeros(n, n);
    for (r, &k) in set.iter().enumerate() {
        if restricted && owned.binary_search(&k).is_err() {
            continue;
        }
        out.row_mut(k).copy_from(&b.row(r));
    }
    out
}

/// Probed `E` plus, when every `ε_i < 1/2`, the structural formula
/// `θ Σ R_iᵀ ℰ_i A_i⁻¹ R_i A` for the additive variants.
pub fn assemble_e_additive(
    full: &SchwarzOperator,
    mp: &SchwarzOperator,
    cap: DenseCap,
) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>)> {
    if full.config.variant == Variant::MS {
        return Err(Error::InvalidArgument("additive formula does not apply to MS".into()));
    }
    let probed = assemble_e_probed(full, mp, cap)?;
    let a = full.a.to_dense();
    let restricted = full.config.variant == Variant::RAS;
    let mut formula = DMatrix::zeros(full.size(), full.size());
    for i in 0..full.partition.p() {
        let (e_i, eps) = subdomain_error_matrix(&mp.subdomains[i], cap)?;
        if eps >= 0.5 {
            return Ok((probed, None));
        }
        let block = e_i * local_solve_block(full, &a, i, cap)?;
        formula += prolong_block(full, i, &block, restricted);
    }
    formula *= full.config.damping();
    Ok((probed, Some(formula)))
}

/// The three terms of the two-subdomain multiplicative error.
#[derive(Debug, Clone)]
pub struct MsDecomposition {
    pub g1: DMatrix<f64>,
    pub g2: DMatrix<f64>,
    pub g3: DMatrix<f64>,
    pub e: DMatrix<f64>,
}

pub fn decompose_e_ms(full: &SchwarzOperator, mp: &SchwarzOperator, cap: DenseCap) -> Result<MsDecomposition> {
    if full.config.variant != Variant::MS || full.partition.p() != 2 {
        return Err(Error::InvalidArgument("MS decomposition needs the MS variant with p = 2".into()));
    }
    let e = assemble_e_probed(full, mp, cap)?;
    let n = full.size();
    let a = full.a.to_dense();
    let id = DMatrix::<f64>::identity(n, n);
    let mut p = Vec::with_capacity(2);
    let mut q = Vec::with_capacity(2);
    for i in 0..2 {
        let block = local_solve_block(full, &a, i, cap)?;
        let (e_i, _) = subdomain_error_matrix(&mp.subdomains[i], cap)?;
        q.push(prolong_block(full, i, &(e_i * &block), false));
        p.push(prolong_block(full, i, &block, false));
    }
    // Subdomain 0 is swept first: T = (I - P₂)(I - P₁) with P₁ ↔ index 0.
    let g1 = (&id - &p[1]) * &q[0];
    let g2 = &q[1] * (&id - &p[0]);
    let g3 = -(&q[1] * &q[0]);
    Ok(MsDecomposition { g1, g2, g3, e })
}

/// `τ` such that `F_i = τ 𝒜_i` on every subdomain, if one exists.
pub fn scalar_tau(mp: &SchwarzOperator) -> Option<f64> {
    let mut tau = None;
    for s in &mp.subdomains {
        for ((_, _, a), (_, _, f)) in s.rounded.a_scaled.iter().zip(s.rounded.f.iter()) {
            let t = f / a;
            match tau {
                None => tau = Some(t),
                Some(t0) if (t - t0).abs() <= 1e-14 * t0.abs().max(f64::MIN_POSITIVE) => {}
                _ => return None,
            }
        }
    }
    tau
}

fn rel(x: f64, scale: f64) -> f64 {
    x / scale.max(1.0)
}

/// Full perturbation report. The bound is evaluated only when `ε < 1/2`.
pub fn perturb_report(full: &SchwarzOperator, mp: &SchwarzOperator, cap: DenseCap) -> Result<PerturbReport> {
    check_pair(full, mp, cap)?;
    let mut subdomains = Vec::with_capacity(mp.partition.p());
    for (i, s) in mp.subdomains.iter().enumerate() {
        let (e_i, epsilon) = subdomain_error_matrix(s, cap).map_err(|e| e.in_subdomain(i))?;
        let kappa = s.scaling.kappa_dc();
        subdomains.push(SubdomainPerturbation {
            subdomain: i,
            epsilon,
            cal_e_norm: two_norm_dense(&e_i),
            kappa_dc: kappa,
            cal_e_bound: 2.0 * epsilon * kappa,
        });
    }
    let epsilon = subdomains.iter().map(|s| s.epsilon).fold(0.0, f64::max);
    let kappa_dc = subdomains.iter().map(|s| s.kappa_dc).fold(1.0, f64::max);
    let variant = full.config.variant;
    let (e, formula_residual, e_formula_norm2, ms) = if variant == Variant::MS {
        if full.partition.p() == 2 {
            let d = decompose_e_ms(full, mp, cap)?;
            let e_norm = two_norm_dense(&d.e);
            let sum = &d.g1 + &d.g2 + &d.g3;
            let ms = MsNorms {
                g1: two_norm_dense(&d.g1),
                g2: two_norm_dense(&d.g2),
                g3: two_norm_dense(&d.g3),
                sum_residual: rel(two_norm_dense(&(sum - &d.e)), e_norm),
            };
            (d.e, None, None, Some(ms))
        } else {
            (assemble_e_probed(full, mp, cap)?, None, None, None)
        }
    } else {
        let (probed, formula) = assemble_e_additive(full, mp, cap)?;
        let res = formula.as_ref().map(|f| rel(two_norm_dense(&(&probed - f)), two_norm_dense(&probed)));
        let norm = formula.as_ref().map(two_norm_dense);
        (probed, res, norm, None)
    };
    let n = full.size();
    let precond = DMatrix::<f64>::identity(n, n) - full.assemble_dense_iteration_matrix(cap)?;
    let precond_norm2 = two_norm_dense(&precond);
    let e_norm2 = two_norm_dense(&e);
    let bound = (epsilon < 0.5 && variant != Variant::MS).then(|| 2.0 * epsilon * kappa_dc * precond_norm2);
    Ok(PerturbReport {
        variant,
        format: mp.config.solve_fmt.name(),
        subdomains,
        epsilon,
        kappa_dc,
        e_norm2,
        e_formula_norm2,
        e_frobenius: e.norm(),
        precond_norm2,
        bound,
        bound_holds: bound.map(|b| e_formula_norm2.unwrap_or(e_norm2) <= b),
        formula_residual,
        ms,
        tau: scalar_tau(mp),
    })
}

/// Convergence factor of a GMRES history: the smallest `ρ` with
/// `r_k ≤ ρ^k` at every step `k ≥ 1` whose relative residual lies in
/// `[lo, hi]`. A least-squares slope would ignore the early plateau and
/// undercut the run's own residuals.
pub fn fit_gmres_rho(history: &[f64], lo: f64, hi: f64) -> Option<f64> {
    history
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &r)| r >= lo && r <= hi && r > 0.0)
        .map(|(k, &r)| r.powf(1.0 / k as f64))
        .reduce(f64::max)
}

/// The residual window used to fit `ρ` from a full-precision run.
pub const RHO_WINDOW: (f64, f64) = (1e-9, 1e-2);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    pub k: usize,
    pub actual: f64,
    pub bound: f64,
    pub holds: bool,
    /// `actual` lies inside the linear-phase window.
    pub linear_phase: bool,
}

/// `(ρ + (1+ρ)‖A⁻¹M‖₂‖E‖_F / √k)^k` for `k = 1..`, against the
/// multiprecision residual history (which starts at `k = 0`).
pub fn check_gmres_linear_bound(residuals_mp: &[f64], rho_full: f64, a_inv_m_norm: f64, e_frobenius: f64) -> Vec<BoundPoint> {
    let (lo, hi) = RHO_WINDOW;
    residuals_mp
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &actual)| {
            let kf = k as f64;
            let bound = (rho_full + (1.0 + rho_full) * a_inv_m_norm * e_frobenius / kf.sqrt()).powf(kf);
            BoundPoint { k, actual, bound, holds: actual <= bound, linear_phase: actual >= lo && actual <= hi }
        })
        .collect()
}

/// `‖A⁻¹M‖₂ = ‖(M⁻¹A)⁻¹‖₂` of a full-precision preconditioner.
pub fn a_inv_m_norm(full: &SchwarzOperator, cap: DenseCap) -> Result<f64> {
    let n = full.size();
    cap.check(n)?;
    let precond = DMatrix::<f64>::identity(n, n) - full.assemble_dense_iteration_matrix(cap)?;
    Ok(two_norm_dense(&dense_inverse(&precond, cap)?))
}

pub fn bound_csv(points: &[BoundPoint]) -> String {
    let mut s = String::from("k,actual,bound,holds,linear_phase\n");
    for p in points {
        s.push_str(&format!("{},{:e},{:e},{},{}\n", p.k, p.actual, p.bound, p.holds, p.linear_phase));
    }
    s
}
