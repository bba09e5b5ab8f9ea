//! One experiment job: problem setup plus the requested analyses, each
//! written to its own file in a job directory.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use mpschwarz::conditions::check_operator;
use mpschwarz::decomp::{strip_partition, Partition};
use mpschwarz::fpsim::FloatFormat;
use mpschwarz::gmres::{gmres_solve, GmresConfig};
use mpschwarz::linalg::{lu_factor, write_matrix_market, DenseCap, SparseMatrix};
use mpschwarz::pde::{discretize, make_rhs_and_init, GridSpec, ProblemInfo, ProblemSpec};
use mpschwarz::perturb::{
    a_inv_m_norm, bound_csv, check_gmres_linear_bound, fit_gmres_rho, perturb_report, PERTURB_CAP, RHO_WINDOW,
};
use mpschwarz::rounding::RoundingKind;
use mpschwarz::schwarz::{build_operator, SchwarzConfig, SchwarzOperator, SolveMode, Variant};

use crate::snapshot::export_error_snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Iterate,
    Conditions,
    Gmres,
    Perturb,
    Snapshots,
}

/// Everything that determines a job's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobSpec {
    pub problem: u8,
    pub n: usize,
    pub method: Variant,
    pub format: String,
    pub rounding: RoundingKind,
    pub solve_mode: SolveMode,
    pub seed: u64,
    pub subdomains: usize,
    pub overlap: usize,
    pub theta: f64,
    pub nu: f64,
    pub nu_hat: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub gmres_tol: f64,
    pub gmres_max_iters: usize,
    pub snapshot_iters: Vec<usize>,
    pub analyses: Vec<Analysis>,
}

impl JobSpec {
    pub fn new(problem: u8, n: usize, method: Variant, format: &str) -> Self {
        JobSpec {
            problem,
            n,
            method,
            format: format.to_string(),
            rounding: RoundingKind::MmatrixUp,
            solve_mode: SolveMode::RoundedMatrixExactSolve,
            seed: 0,
            subdomains: 2,
            overlap: 1,
            theta: mpschwarz::schwarz::DEFAULT_THETA,
            nu: mpschwarz::scaling::DEFAULT_NU,
            nu_hat: mpschwarz::scaling::DEFAULT_NU_HAT,
            tol: 1e-10,
            max_iters: 2000,
            gmres_tol: 1e-12,
            gmres_max_iters: 100,
            snapshot_iters: vec![1, 2, 3],
            analyses: vec![Analysis::Iterate, Analysis::Conditions],
        }
    }

    pub fn config(&self) -> Result<SchwarzConfig> {
        let fmt = FloatFormat::preset(&self.format)?;
        let mut cfg = SchwarzConfig::new(self.method, fmt)
            .with_rounding(self.rounding)
            .with_solve_mode(self.solve_mode)
            .with_theta(self.theta);
        cfg.nu = self.nu;
        cfg.nu_hat = self.nu_hat;
        cfg.max_iters = self.max_iters;
        cfg.stop_tol = self.tol;
        if self.analyses.contains(&Analysis::Snapshots) {
            cfg.retain = self.snapshot_iters.clone();
        }
        Ok(cfg)
    }
}

/// Matrix, partition, right-hand side, initial guess and reference solution.
pub struct Setup {
    pub grid: GridSpec,
    pub spec: ProblemSpec,
    pub a: SparseMatrix,
    pub partition: Partition,
    pub f: Vec<f64>,
    pub u0: Vec<f64>,
    pub u_true: Vec<f64>,
}

pub fn problem_spec(id: u8) -> Result<ProblemSpec> {
    Ok(if id == 0 { ProblemSpec::poisson() } else { ProblemSpec::model(id)? })
}

pub fn setup(job: &JobSpec) -> Result<Setup> {
    let grid = GridSpec::new(job.n);
    let spec = problem_spec(job.problem)?;
    let a = discretize(&spec, grid)?;
    let partition = strip_partition(grid, job.subdomains, job.overlap)?;
    let (f, u0) = make_rhs_and_init(grid.size(), job.seed);
    let u_true = lu_factor(&a)?.solve(&f)?;
    Ok(Setup { grid, spec, a, partition, f, u0, u_true })
}

fn write(dir: &Path, name: &str, contents: &str, outputs: &mut Vec<String>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    outputs.push(name.to_string());
    Ok(())
}

fn exact_operator(s: &Setup, method: Variant, theta: f64) -> Result<SchwarzOperator> {
    Ok(build_operator(&s.a, &s.partition, &SchwarzConfig::exact(method).with_theta(theta))?)
}

/// Writes the matrix and its metadata.
pub fn generate(problem: u8, n: usize, dir: &Path) -> Result<Vec<String>> {
    let grid = GridSpec::new(n);
    let spec = problem_spec(problem)?;
    let a = discretize(&spec, grid)?;
    let mut outputs = vec![];
    let mut buf = Vec::new();
    write_matrix_market(&a, &mut buf)?;
    write(dir, "matrix.mtx", std::str::from_utf8(&buf)?, &mut outputs)?;
    write(dir, "problem.json", &serde_json::to_string_pretty(&ProblemInfo::new(&spec, grid, &a))?, &mut outputs)?;
    Ok(outputs)
}

/// Runs every analysis of `job`, writing files into `dir`. Returns the
/// file names written, relative to `dir`.
pub fn run_job(job: &JobSpec, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let s = setup(job)?;
    let cfg = job.config()?;
    let op = build_operator(&s.a, &s.partition, &cfg)?;
    let mut outputs = vec![];
    let mut summary = serde_json::Map::new();
    summary.insert("job".into(), serde_json::to_value(job)?);
    summary.insert("problem".into(), serde_json::to_value(ProblemInfo::new(&s.spec, s.grid, &s.a))?);
    summary.insert("partition_q".into(), s.partition.q.into());

    if job.analyses.contains(&Analysis::Iterate) || job.analyses.contains(&Analysis::Snapshots) {
        let trace = op.iterate(&s.u0, &s.f, Some(&s.u_true))?;
        write(dir, "trace.csv", &trace.to_csv(), &mut outputs)?;
        summary.insert("iterate".into(), serde_json::to_value(&trace)?);
        if job.analyses.contains(&Analysis::Snapshots) {
            for name in export_error_snapshot(&trace, &job.snapshot_iters, job.n, dir)? {
                outputs.push(name);
            }
        }
    }
    if job.analyses.contains(&Analysis::Conditions) {
        let report = check_operator(&op, DenseCap::default())?;
        summary.insert("certified".into(), report.certified().into());
        write(dir, "conditions.json", &report.to_json()?, &mut outputs)?;
    }
    if job.analyses.contains(&Analysis::Gmres) {
        let gcfg = GmresConfig { tol: job.gmres_tol, max_iters: job.gmres_max_iters, reorth: false };
        let r = gmres_solve(&s.a, &op, &s.f, &gcfg)?;
        write(dir, "gmres.csv", &r.to_csv(), &mut outputs)?;
        summary.insert(
            "gmres".into(),
            serde_json::json!({ "iters": r.iters, "converged": r.converged, "true_residual": r.true_residual }),
        );
    }
    if job.analyses.contains(&Analysis::Perturb) {
        let full = exact_operator(&s, job.method, job.theta)?;
        let report = perturb_report(&full, &op, PERTURB_CAP)?;
        write(dir, "perturb.json", &report.to_json()?, &mut outputs)?;
        let gcfg = GmresConfig { tol: job.gmres_tol, max_iters: job.gmres_max_iters, reorth: false };
        let full_run = gmres_solve(&s.a, &full, &s.f, &gcfg)?;
        let mp_run = gmres_solve(&s.a, &op, &s.f, &gcfg)?;
        if let Some(rho) = fit_gmres_rho(&full_run.residual_history, RHO_WINDOW.0, RHO_WINDOW.1) {
            let pts = check_gmres_linear_bound(&mp_run.residual_history, rho, a_inv_m_norm(&full, PERTURB_CAP)?, report.e_frobenius);
            write(dir, "gmres_bound.csv", &bound_csv(&pts), &mut outputs)?;
        }
    }
    write(dir, "summary.json", &serde_json::to_string_pretty(&summary)?, &mut outputs)?;
    Ok(outputs)
}
