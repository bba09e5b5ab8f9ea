//! Schwarz iterations with low-precision subdomain solves.
//!
//! Every variant is applied in residual form, `u⁺ = u + Σ P_i Ã_i⁻¹ R_i (f - A u)`,
//! so the exact solution is a fixed point at any subdomain precision. The
//! subdomain inverse `Ã_i⁻¹` is realized by the pipeline scale, round,
//! factorize, solve, unscale.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use log::{debug, warn};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::Partition;
use crate::error::{Error, Result};
use crate::fpsim::FloatFormat;
use crate::linalg::{l2, lu_factor, lu_factor_in, DenseCap, LuFactors, SparseMatrix};
use crate::rounding::{RoundedSubdomain, RoundingKind, RoundingRoutine};
use crate::scaling::{
    scale_general, scale_rhs, scale_symmetric, unscale_solution, ScalingData, DEFAULT_NU, DEFAULT_NU_HAT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Additive Schwarz, `θ = 1`.
    AS,
    /// Damped additive Schwarz.
    DAS,
    /// Restricted additive Schwarz.
    RAS,
    /// Multiplicative Schwarz, subdomains visited in order `1..p`.
    MS,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::AS, Variant::DAS, Variant::RAS, Variant::MS];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::AS => "as",
            Variant::DAS => "das",
            Variant::RAS => "ras",
            Variant::MS => "ms",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "as" => Ok(Variant::AS),
            "das" => Ok(Variant::DAS),
            "ras" => Ok(Variant::RAS),
            "ms" => Ok(Variant::MS),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveMode {
    /// Factors of the rounded matrix applied in working precision. This is
    /// the setting the convergence theory analyzes.
    RoundedMatrixExactSolve,
    /// Factorization and triangular solves with every operation rounded to
    /// the subdomain format.
    FullySimulatedSolve,
}

impl FromStr for SolveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" | "rounded-matrix" | "roundedmatrixexactsolve" => Ok(SolveMode::RoundedMatrixExactSolve),
            "simulated" | "fully-simulated" | "fullysimulatedsolve" => Ok(SolveMode::FullySimulatedSolve),
            other => Err(Error::InvalidArgument(format!("unknown solve mode {other:?}"))),
        }
    }
}

/// Default damping for damped additive Schwarz with two colors.
pub const DEFAULT_THETA: f64 = 0.49;
const DIVERGENCE_GROWTH: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchwarzConfig {
    pub variant: Variant,
    /// Damping, used by [`Variant::DAS`] only.
    pub theta: f64,
    pub solve_fmt: FloatFormat,
    pub rounding: RoundingKind,
    pub solve_mode: SolveMode,
    /// Two-sided rescaling before rounding. With [`RoundingKind::DiagExact`]
    /// the symmetric variant is used.
    pub scaling_on: bool,
    pub nu: f64,
    pub nu_hat: f64,
    pub max_iters: usize,
    /// Relative tolerance on the error (when the solution is known) or on
    /// the residual.
    pub stop_tol: f64,
    /// Iterations whose error vectors are kept in the trace.
    pub retain: Vec<usize>,
}

impl SchwarzConfig {
    pub fn new(variant: Variant, solve_fmt: FloatFormat) -> Self {
        SchwarzConfig {
            variant,
            theta: DEFAULT_THETA,
            solve_fmt,
            rounding: RoundingKind::MmatrixUp,
            solve_mode: SolveMode::RoundedMatrixExactSolve,
            scaling_on: true,
            nu: DEFAULT_NU,
            nu_hat: DEFAULT_NU_HAT,
            max_iters: 2000,
            stop_tol: 1e-10,
            retain: Vec::new(),
        }
    }

    /// Full-precision counterpart: fp64, nearest rounding, no scaling.
    pub fn exact(variant: Variant) -> Self {
        SchwarzConfig { rounding: RoundingKind::PlainNearest, scaling_on: false, ..Self::new(variant, FloatFormat::fp64()) }
    }

    pub fn with_rounding(mut self, rounding: RoundingKind) -> Self {
        self.rounding = rounding;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_scaling(mut self, on: bool) -> Self {
        self.scaling_on = on;
        self
    }

    pub fn with_solve_mode(mut self, mode: SolveMode) -> Self {
        self.solve_mode = mode;
        self
    }

    /// The factor applied to the summed corrections.
    pub fn damping(&self) -> f64 {
        match self.variant {
            Variant::DAS => self.theta,
            _ => 1.0,
        }
    }
}

/// One subdomain after scaling, rounding and factorization.
#[derive(Debug, Clone)]
pub struct ScaledSubdomain {
    /// Unscaled `A_i = R_i A R_iᵀ`.
    pub a_i: SparseMatrix,
    pub scaling: ScalingData,
    pub rounded: RoundedSubdomain,
    pub factors: LuFactors,
}

impl ScaledSubdomain {
    pub fn build(a_i: SparseMatrix, cfg: &SchwarzConfig) -> Result<Self> {
        let fmt = &cfg.solve_fmt;
        let (scaling, a_scaled) = if !cfg.scaling_on {
            (ScalingData::identity(a_i.n()), a_i.clone())
        } else if cfg.rounding == RoundingKind::DiagExact {
            scale_symmetric(&a_i, fmt, cfg.nu)?
        } else {
            scale_general(&a_i, fmt, cfg.nu)?
        };
        let scaling = if cfg.scaling_on { scaling.with_nu_hat(cfg.nu_hat) } else { scaling };
        let rounded = RoundingRoutine::new(cfg.rounding, *fmt).apply(&a_scaled)?;
        let factors = match cfg.solve_mode {
            SolveMode::RoundedMatrixExactSolve => lu_factor(&rounded.a_rounded)?,
            SolveMode::FullySimulatedSolve => lu_factor_in(&rounded.a_rounded, fmt)?,
        };
        Ok(ScaledSubdomain { a_i, scaling, rounded, factors })
    }

    /// `Ã_i⁻¹ g`.
    pub fn solve(&self, g: &[f64], mode: SolveMode) -> Result<Vec<f64>> {
        let (b, nb) = scale_rhs(g, &self.scaling)?;
        if nb == 0.0 {
            return Ok(vec![0.0; g.len()]);
        }
        let v = match mode {
            SolveMode::RoundedMatrixExactSolve => self.factors.solve(&b)?,
            SolveMode::FullySimulatedSolve => {
                let fmt = self.factors.precision();
                let b: Vec<f64> = b.iter().map(|&x| fmt.chop(x)).collect();
                let v = self.factors.solve_in(&b, fmt)?;
                if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::Overflow { value: *x, format: fmt.name() });
                }
                v
            }
        };
        Ok(unscale_solution(&v, &self.scaling, nb))
    }
}

/// A Schwarz method ready to be applied.
#[derive(Debug, Clone)]
pub struct SchwarzOperator {
    pub a: SparseMatrix,
    pub partition: Partition,
    pub config: SchwarzConfig,
    pub subdomains: Vec<ScaledSubdomain>,
}

/// Scales, rounds and factorizes every subdomain.
pub fn build_operator(a: &SparseMatrix, part: &Partition, cfg: &SchwarzConfig) -> Result<SchwarzOperator> {
    if a.n() != part.size {
        return Err(Error::DimensionMismatch { expected: part.size, got: a.n() });
    }
    if cfg.variant == Variant::DAS && cfg.theta * part.q as f64 >= 1.0 {
        warn!("damping θ = {} is not below 1/q = 1/{}; convergence is not guaranteed", cfg.theta, part.q);
    }
    let subdomains = (0..part.p())
        .into_par_iter()
        .map(|i| ScaledSubdomain::build(a.principal_submatrix(&part.sets[i]), cfg).map_err(|e| e.in_subdomain(i)))
        .collect::<Result<Vec<_>>>()?;
    let overflows: usize = subdomains.iter().map(|s| s.rounded.stats.overflows).sum();
    debug!("built {} operator at {}: {} overflow events", cfg.variant, cfg.solve_fmt, overflows);
    Ok(SchwarzOperator { a: a.clone(), partition: part.clone(), config: cfg.clone(), subdomains })
}

fn residual(a: &SparseMatrix, u: &[f64], f: &[f64]) -> Vec<f64> {
    let au = a.matvec(u);
    f.iter().zip(au).map(|(fi, x)| fi - x).collect()
}

impl SchwarzOperator {
    pub fn size(&self) -> usize {
        self.a.n()
    }

    /// `Ã_i⁻¹ g` for subdomain `i`.
    pub fn subdomain_solve(&self, i: usize, g: &[f64]) -> Result<Vec<f64>> {
        self.subdomains[i].solve(g, self.config.solve_mode).map_err(|e| e.in_subdomain(i))
    }

    /// One iteration `u⁺ = T̃ u + c`.
    pub fn sweep(&self, u: &[f64], f: &[f64]) -> Result<Vec<f64>> {
        let n = self.size();
        if u.len() != n || f.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: if u.len() != n { u.len() } else { f.len() } });
        }
        let part = &self.partition;
        match self.config.variant {
            Variant::MS => {
                let mut u = u.to_vec();
                for i in 0..part.p() {
                    // Only the rows of W_i of the residual are needed.
                    let r: Vec<f64> = part.sets[i]
                        .iter()
                        .map(|&k| {
                            let (cols, vals) = self.a.row(k);
                            f[k] - cols.iter().zip(vals).map(|(&j, &v)| v * u[j]).sum::<f64>()
                        })
                        .collect();
                    let c = self.subdomain_solve(i, &r)?;
                    part.prolong_add(&c, i, false, 1.0, &mut u)?;
                }
                Ok(u)
            }
            variant => {
                let r = residual(&self.a, u, f);
                let corrections = (0..part.p())
                    .into_par_iter()
                    .map(|i| self.subdomain_solve(i, &part.restrict(&r, i)?))
                    .collect::<Result<Vec<_>>>()?;
                // Fixed ascending reduction order keeps results reproducible.
                let mut sum = vec![0.0; n];
                for (i, c) in corrections.iter().enumerate() {
                    part.prolong_add(c, i, variant == Variant::RAS, 1.0, &mut sum)?;
                }
                let theta = self.config.damping();
                Ok(u.iter().zip(sum).map(|(x, s)| x + theta * s).collect())
            }
        }
    }

    /// `M̃⁻¹ v`, one sweep from zero.
    pub fn apply_preconditioner(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.sweep(&vec![0.0; self.size()], v)
    }

    /// Dense `T̃` with columns `T̃ e_j` (sweeps with `f = 0`).
    pub fn assemble_dense_iteration_matrix(&self, cap: DenseCap) -> Result<DMatrix<f64>> {
        let n = self.size();
        cap.check(n)?;
        let zero = vec![0.0; n];
        self.assemble_columns(|e| self.sweep(e, &zero))
    }

    /// Dense `M̃⁻¹` with columns `M̃⁻¹ e_j`.
    pub fn assemble_dense_preconditioner(&self, cap: DenseCap) -> Result<DMatrix<f64>> {
        cap.check(self.size())?;
        self.assemble_columns(|e| self.apply_preconditioner(e))
    }

    fn assemble_columns(&self, op: impl Fn(&[f64]) -> Result<Vec<f64>> + Sync) -> Result<DMatrix<f64>> {
        let n = self.size();
        let cols = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                op(&e)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(n, n, |i, j| cols[j][i]))
    }

    /// Runs sweeps until the relative error (or residual) drops below the
    /// configured tolerance.
    pub fn iterate(&self, u0: &[f64], f: &[f64], u_true: Option<&[f64]>) -> Result<IterationTrace> {
        let cfg = &self.config;
        let start = Instant::now();
        let mut trace = IterationTrace::default();
        let mut u = u0.to_vec();
        let record = |u: &[f64], k: usize, trace: &mut IterationTrace| -> f64 {
            let res = l2(&residual(&self.a, u, f));
            trace.res_2norm.push(res);
            trace.wall_time.push(start.elapsed().as_secs_f64());
            if let Some(x) = u_true {
                let e: Vec<f64> = u.iter().zip(x).map(|(a, b)| a - b).collect();
                let en = l2(&e);
                trace.err_2norm.push(en);
                if cfg.retain.contains(&k) {
                    trace.snapshots.insert(k, e);
                }
                en
            } else {
                res
            }
        };
        let m0 = record(&u, 0, &mut trace);
        let mut best = m0;
        trace.converged = m0 == 0.0;
        while !trace.converged && trace.iterations < cfg.max_iters {
            u = self.sweep(&u, f)?;
            trace.iterations += 1;
            let m = record(&u, trace.iterations, &mut trace);
            if !m.is_finite() || m > DIVERGENCE_GROWTH * best {
                trace.diverged = true;
                break;
            }
            best = best.min(m);
            trace.converged = m <= cfg.stop_tol * m0;
        }
        let monitored = if u_true.is_some() { &trace.err_2norm } else { &trace.res_2norm };
        trace.rho_conv = estimate_rho(monitored);
        trace.solution = u;
        Ok(trace)
    }
}

/// Geometric mean of successive norm ratios over the last `min(40, k/2)`
/// iterations, ignoring the first 10.
pub fn estimate_rho(norms: &[f64]) -> Option<f64> {
    let ratios: Vec<f64> = norms.windows(2).filter(|w| w[0] > 0.0 && w[1] > 0.0).map(|w| w[1] / w[0]).collect();
    if ratios.is_empty() {
        return None;
    }
    let iters = norms.len() - 1;
    let window = 40.min(iters / 2).max(1);
    let usable = if ratios.len() > 10 { &ratios[10..] } else { &ratios[..] };
    let tail = &usable[usable.len().saturating_sub(window)..];
    let mean_log = tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64;
    Some(mean_log.exp())
}

/// Norm history of one run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IterationTrace {
    /// Error 2-norms, entry `k` after `k` sweeps (empty without a reference solution).
    pub err_2norm: Vec<f64>,
    pub res_2norm: Vec<f64>,
    /// Seconds since the start of the run.
    pub wall_time: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub rho_conv: Option<f64>,
    #[serde(skip)]
    pub snapshots: BTreeMap<usize, Vec<f64>>,
    #[serde(skip)]
    pub solution: Vec<f64>,
}

impl IterationTrace {
    /// CSV with columns `iter, err_2norm, res_2norm`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iter,err_2norm,res_2norm\n");
        for (k, r) in self.res_2norm.iter().enumerate() {
            let e = self.err_2norm.get(k).map_or(String::new(), |e| format!("{e:e}"));
            s.push_str(&format!("{k},{e},{r:e}\n"));
        }
        s
    }

    pub fn error_snapshot(&self, iter: usize) -> Result<&[f64]> {
        self.snapshots.get(&iter).map(|v| v.as_slice()).ok_or(Error::NotRetained(iter))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{two_domain_partition, whole_domain, Partition};
    use crate::linalg::{dense_inverse, rel_diff, spectral_radius_dense};
    use crate::pde::{discretize, GridSpec, ProblemSpec};

    fn problem(n: usize) -> (SparseMatrix, Partition) {
        let g = GridSpec::new(n);
        (discretize(&ProblemSpec::model(1).unwrap(), g).unwrap(), two_domain_partition(g, 1).unwrap())
    }

    #[test]
    fn exact_solution_is_fixed_point() {
        let (a, part) = problem(8);
        let x: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).cos()).collect();
        let f = a.matvec(&x);
        for v in Variant::ALL {
            let op = build_operator(&a, &part, &SchwarzConfig::new(v, FloatFormat::preset("q43").unwrap())).unwrap();
            assert!(rel_diff(&op.sweep(&x, &f).unwrap(), &x) < 1e-12, "{v}");
        }
    }

    #[test]
    fn fp64_subdomain_solve_is_direct_solve() {
        let (a, part) = problem(8);
        let op = build_operator(&a, &part, &SchwarzConfig::new(Variant::MS, FloatFormat::fp64())).unwrap();
        let g: Vec<f64> = (0..part.len(0)).map(|i| 1.0 + i as f64).collect();
        let direct = lu_factor(&op.subdomains[0].a_i).unwrap().solve(&g).unwrap();
        assert!(rel_diff(&op.subdomain_solve(0, &g).unwrap(), &direct) < 1e-12);
    }

    #[test]
    fn decimal_solve_matches_dense_inverse_of_rounded() {
        let a = crate::linalg::tridiag(10, -1.3, 3.1, -0.7);
        let part = whole_domain(10);
        let cfg = SchwarzConfig::new(Variant::AS, FloatFormat::decimal(5).unwrap());
        let op = build_operator(&a, &part, &cfg).unwrap();
        let sd = &op.subdomains[0];
        // Ã⁻¹ = μ D_c 𝒜̃⁻¹ D_r.
        let inv = dense_inverse(&sd.rounded.a_rounded.to_dense(), DenseCap::default()).unwrap();
        let g: Vec<f64> = (0..10).map(|i| (i as f64).sin() + 2.0).collect();
        let b: Vec<f64> = g.iter().zip(&sd.scaling.d_r).map(|(x, d)| x * d).collect();
        let y = inv * nalgebra::DVector::from_vec(b);
        let oracle: Vec<f64> = (0..10).map(|i| sd.scaling.mu * sd.scaling.d_c[i] * y[i]).collect();
        assert!(rel_diff(&op.subdomain_solve(0, &g).unwrap(), &oracle) < 1e-10);
    }

    #[test]
    fn sweep_matches_dense_iteration_matrix() {
        let (a, part) = problem(6);
        let u: Vec<f64> = (0..36).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        for v in Variant::ALL {
            let op = build_operator(&a, &part, &SchwarzConfig::new(v, FloatFormat::preset("fp16").unwrap())).unwrap();
            let t = op.assemble_dense_iteration_matrix(DenseCap::default()).unwrap();
            let dense = t * nalgebra::DVector::from_column_slice(&u);
            assert!(rel_diff(&op.sweep(&u, &[0.0; 36]).unwrap(), dense.as_slice()) < 1e-12);
        }
    }

    #[test]
    fn preconditioner_is_linear() {
        let (a, part) = problem(6);
        let op = build_operator(&a, &part, &SchwarzConfig::new(Variant::RAS, FloatFormat::decimal(3).unwrap())).unwrap();
        let v: Vec<f64> = (0..36).map(|i| (i as f64).sqrt()).collect();
        let w: Vec<f64> = (0..36).map(|i| (i as f64 * 1.3).sin()).collect();
        let comb: Vec<f64> = v.iter().zip(&w).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        let lhs = op.apply_preconditioner(&comb).unwrap();
        let (pv, pw) = (op.apply_preconditioner(&v).unwrap(), op.apply_preconditioner(&w).unwrap());
        let rhs: Vec<f64> = pv.iter().zip(&pw).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
        assert!(rel_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn fp64_matches_unscaled_operator() {
        let (a, part) = problem(6);
        let scaled = build_operator(&a, &part, &SchwarzConfig::new(Variant::MS, FloatFormat::fp64())).unwrap();
        let plain = build_operator(&a, &part, &SchwarzConfig::exact(Variant::MS)).unwrap();
        let t1 = scaled.assemble_dense_iteration_matrix(DenseCap::default()).unwrap();
        let t2 = plain.assemble_dense_iteration_matrix(DenseCap::default()).unwrap();
        assert!((t1 - t2).amax() < 1e-12);
    }

    #[test]
    fn iterate_converges_and_estimates_rho() {
        let (a, part) = problem(10);
        let (f, u0) = crate::pde::make_rhs_and_init(100, 1);
        let x = lu_factor(&a).unwrap().solve(&f).unwrap();
        let mut cfg = SchwarzConfig::new(Variant::MS, FloatFormat::fp64());
        cfg.retain = vec![1, 2];
        let op = build_operator(&a, &part, &cfg).unwrap();
        let tr = op.iterate(&u0, &f, Some(&x)).unwrap();
        assert!(tr.converged && !tr.diverged);
        let rho = spectral_radius_dense(&op.assemble_dense_iteration_matrix(DenseCap::default()).unwrap(), DenseCap::default())
            .unwrap();
        assert!((tr.rho_conv.unwrap() - rho).abs() < 0.02, "{:?} vs {rho}", tr.rho_conv);
        assert_eq!(tr.error_snapshot(1).unwrap().len(), 100);
        assert!(matches!(tr.error_snapshot(3), Err(Error::NotRetained(3))));
        assert!(tr.to_csv().starts_with("iter,err_2norm,res_2norm\n0,"));
        // Starting from the solution needs no sweeps.
        let tr0 = op.iterate(&x, &a.matvec(&x), Some(&x)).unwrap();
        assert_eq!(tr0.iterations, 0);
        assert!(tr0.converged);
    }

    #[test]
    fn rho_estimator_on_geometric_sequence() {
        let norms: Vec<f64> = (0..100).map(|k| 0.7f64.powi(k)).collect();
        assert!((estimate_rho(&norms).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(estimate_rho(&[1.0]), None);
    }

    #[test]
    fn parses_names() {
        assert_eq!("das".parse::<Variant>().unwrap(), Variant::DAS);
        assert_eq!("exact".parse::<SolveMode>().unwrap(), SolveMode::RoundedMatrixExactSolve);
        assert!("xyz".parse::<Variant>().is_err());
    }
}
