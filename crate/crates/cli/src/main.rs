use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use mpschwarz::rounding::RoundingKind;
use mpschwarz::schwarz::{SolveMode, Variant};
use mpschwarz_cli::plan::{run_plan, ExperimentPlan};
use mpschwarz_cli::runner::{generate, run_job, Analysis, JobSpec};

#[derive(Parser)]
#[command(name = "mpschwarz", version, about = "Multiprecision algebraic Schwarz experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the discretized matrix (Matrix Market) and its metadata.
    Generate {
        #[arg(long, default_value_t = 1)]
        problem: u8,
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the stationary iteration and write its trace.
    Solve(JobArgs),
    /// Check the convergence conditions on every subdomain.
    Conditions(JobArgs),
    /// Solve with GMRES preconditioned by the Schwarz method.
    Gmres(JobArgs),
    /// Dense perturbation analysis against the full-precision method.
    Perturb(JobArgs),
    /// Run a preset (fig1 ... fig8) or a JSON plan file.
    Plan {
        #[arg(long, conflicts_with = "file")]
        preset: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Only print the number of jobs.
        #[arg(long)]
        dry_run: bool,
    },
}

#[derive(Args, Clone)]
struct JobArgs {
    #[arg(long, default_value_t = 1)]
    problem: u8,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value = "ms")]
    method: Variant,
    #[arg(long, default_value = "fp16")]
    format: String,
    /// mmatrix | diag | nearest
    #[arg(long, default_value = "mmatrix")]
    rounding: RoundingKind,
    /// exact | simulated
    #[arg(long, default_value = "exact")]
    solve_mode: SolveMode,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    nu_hat: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stopping tolerance (relative error for solve, preconditioned residual for gmres).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, default_value_t = 2)]
    subdomains: usize,
    /// Iterations whose error grids are written by solve.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

impl JobArgs {
    fn job(&self, analyses: Vec<Analysis>) -> JobSpec {
        let mut j = JobSpec::new(self.problem, self.n, self.method, &self.format);
        j.rounding = self.rounding;
        j.solve_mode = self.solve_mode;
        j.seed = self.seed;
        j.subdomains = self.subdomains;
        j.theta = self.theta.unwrap_or(j.theta);
        j.nu = self.nu.unwrap_or(j.nu);
        j.nu_hat = self.nu_hat.unwrap_or(j.nu_hat);
        let gmres = analyses.contains(&Analysis::Gmres);
        if let Some(t) = self.tol {
            if gmres { j.gmres_tol = t } else { j.tol = t }
        }
        if let Some(m) = self.max_iters {
            if gmres { j.gmres_max_iters = m } else { j.max_iters = m }
        }
        j.analyses = analyses;
        if !self.snapshots.is_empty() {
            j.snapshot_iters = self.snapshots.clone();
            j.analyses.push(Analysis::Snapshots);
        }
        j
    }
}

fn run_single(args: &JobArgs, analyses: Vec<Analysis>) -> Result<()> {
    let files = run_job(&args.job(analyses), &args.out)?;
    for f in files {
        println!("{}", args.out.join(f).display());
    }
    Ok(())
}

/// Runs the command; `Ok(false)` means some plan jobs failed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate { problem, n, out } => {
            std::fs::create_dir_all(&out)?;
            for f in generate(problem, n, &out)? {
                println!("{}", out.join(f).display());
            }
        }
        Command::Solve(a) => run_single(&a, vec![Analysis::Iterate])?,
        Command::Conditions(a) => run_single(&a, vec![Analysis::Conditions])?,
        Command::Gmres(a) => run_single(&a, vec![Analysis::Gmres])?,
        Command::Perturb(a) => run_single(&a, vec![Analysis::Perturb])?,
        Command::Plan { preset, file, out, dry_run } => {
            let plan = match (preset, file) {
                (Some(p), _) => ExperimentPlan::preset(&p)?,
                (None, Some(f)) => {
                    let text = std::fs::read_to_string(&f).with_context(|| format!("reading {}", f.display()))?;
                    serde_json::from_str(&text).context("parsing plan")?
                }
                (None, None) => anyhow::bail!("plan needs --preset or --file"),
            };
            if dry_run {
                println!("{} jobs", plan.jobs().len());
                return Ok(true);
            }
            let manifest = run_plan(&plan, &out)?;
            let failed = manifest.failures();
            println!("{} jobs, {failed} failed; manifest in {}", manifest.jobs.len(), out.display());
            return Ok(failed == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
