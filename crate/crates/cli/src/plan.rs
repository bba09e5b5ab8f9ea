//! Experiment plans: a cartesian sweep over problems, sizes, methods,
//! formats and seeds, executed as independent hashed jobs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mpschwarz::fpsim::BINARY_PRESETS;
use mpschwarz::rounding::RoundingKind;
use mpschwarz::schwarz::{SolveMode, Variant};

use crate::runner::{run_job, Analysis, JobSpec};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub problems: Vec<u8>,
    pub sizes: Vec<usize>,
    pub methods: Vec<Variant>,
    pub formats: Vec<String>,
    pub rounding: RoundingKind,
    pub solve_mode: SolveMode,
    pub seeds: Vec<u64>,
    pub analyses: Vec<Analysis>,
    #[serde(default = "default_snapshots")]
    pub snapshot_iters: Vec<usize>,
}

fn default_snapshots() -> Vec<usize> {
    vec![1, 2, 3]
}

/// Grid sizes giving `N ∈ {2500, 8100, 22500, 48400, 108900}`.
pub const SIZE_SWEEP: [usize; 5] = [50, 90, 150, 220, 330];

fn chop_formats() -> Vec<String> {
    BINARY_PRESETS.iter().map(|s| s.to_string()).collect()
}

fn decimal_formats() -> Vec<String> {
    (1..=16).map(|d| format!("dec:{d}")).collect()
}

impl ExperimentPlan {
    pub fn empty() -> Self {
        ExperimentPlan {
            problems: vec![],
            sizes: vec![],
            methods: vec![],
            formats: vec![],
            rounding: RoundingKind::MmatrixUp,
            solve_mode: SolveMode::RoundedMatrixExactSolve,
            seeds: vec![0],
            analyses: vec![Analysis::Iterate, Analysis::Conditions],
            snapshot_iters: default_snapshots(),
        }
    }

    /// Sweeps mirroring the figures of the reference experiments.
    pub fn preset(name: &str) -> Result<Self> {
        let all = Variant::ALL.to_vec();
        let three = vec![Variant::DAS, Variant::RAS, Variant::MS];
        let base = ExperimentPlan { sizes: vec![50], ..Self::empty() };
        let nonsym = vec![1, 2, 3];
        let sym = vec![4, 5, 6];
        let plan = match name {
            "fig1" => ExperimentPlan { problems: nonsym, methods: all, formats: chop_formats(), ..base },
            "fig2" => ExperimentPlan { problems: nonsym, methods: all, formats: decimal_formats(), ..base },
            "fig3" | "fig7" => ExperimentPlan {
                problems: if name == "fig3" { vec![1] } else { vec![5] },
                methods: vec![Variant::MS],
                formats: ["q43", "bfloat16", "fp16"].map(String::from).to_vec(),
                rounding: if name == "fig3" { RoundingKind::MmatrixUp } else { RoundingKind::DiagExact },
                analyses: vec![Analysis::Snapshots],
                ..base
            },
            "fig4" => ExperimentPlan {
                problems: nonsym,
                sizes: SIZE_SWEEP.to_vec(),
                methods: three,
                formats: decimal_formats(),
                analyses: vec![Analysis::Iterate],
                ..base
            },
            "fig5" => ExperimentPlan {
                problems: nonsym,
                methods: three,
                formats: decimal_formats(),
                analyses: vec![Analysis::Gmres],
                ..base
            },
            "fig6" => {
                let mut formats = chop_formats();
                formats.extend(decimal_formats());
                ExperimentPlan { problems: sym, methods: all, formats, rounding: RoundingKind::DiagExact, ..base }
            }
            "fig8" => ExperimentPlan {
                problems: sym,
                sizes: SIZE_SWEEP.to_vec(),
                methods: three,
                formats: decimal_formats(),
                rounding: RoundingKind::DiagExact,
                analyses: vec![Analysis::Iterate, Analysis::Gmres],
                ..base
            },
            _ => bail!("unknown preset {name:?} (expected fig1 ... fig8)"),
        };
        Ok(plan)
    }

    pub fn jobs(&self) -> Vec<JobSpec> {
        let mut jobs = vec![];
        for &problem in &self.problems {
            for &n in &self.sizes {
                for &method in &self.methods {
                    for format in &self.formats {
                        for &seed in &self.seeds {
                            let mut j = JobSpec::new(problem, n, method, format);
                            j.rounding = self.rounding;
                            j.solve_mode = self.solve_mode;
                            j.seed = seed;
                            j.analyses = self.analyses.clone();
                            j.snapshot_iters = self.snapshot_iters.clone();
                            jobs.push(j);
                        }
                    }
                }
            }
        }
        jobs
    }
}

/// Deterministic hex digest of a job's parameters.
pub fn job_hash(job: &JobSpec) -> String {
    let json = serde_json::to_string(job).expect("job serializes");
    let digest = Sha256::digest(json.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobRecord {
    pub hash: String,
    pub params: JobSpec,
    pub status: JobStatus,
    /// Paths relative to the plan's output directory.
    pub outputs: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub jobs: BTreeMap<String, JobRecord>,
}

impl Manifest {
    fn new() -> Self {
        Manifest { version: env!("CARGO_PKG_VERSION").to_string(), jobs: BTreeMap::new() }
    }

    pub fn load(path: &Path) -> Result<Option<Self>> {
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(path)?;
        Ok(Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?))
    }

    pub fn failures(&self) -> usize {
        self.jobs.values().filter(|j| j.status == JobStatus::Failed).count()
    }

    fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string_pretty(self)?)?;
        fs::rename(tmp, path)?;
        Ok(())
    }
}

fn completed(rec: &JobRecord, out: &Path) -> bool {
    rec.status == JobStatus::Ok && rec.outputs.iter().all(|o| out.join(o).exists())
}

/// Runs every job of the plan in a worker pool. Jobs already completed in
/// an existing manifest are skipped; failures are recorded, not fatal.
pub fn run_plan(plan: &ExperimentPlan, out: &Path) -> Result<Manifest> {
    fs::create_dir_all(out)?;
    let manifest_path = out.join(MANIFEST);
    let mut manifest = Manifest::load(&manifest_path)?.unwrap_or_else(Manifest::new);
    manifest.version = env!("CARGO_PKG_VERSION").to_string();
    let pending: Vec<(String, JobSpec)> = plan
        .jobs()
        .into_iter()
        .map(|j| (job_hash(&j), j))
        .filter(|(h, _)| !manifest.jobs.get(h).is_some_and(|r| completed(r, out)))
        .collect();
    info!("{} jobs pending", pending.len());
    let shared = Mutex::new(manifest);
    pending.into_par_iter().for_each(|(hash, job)| {
        let rel = PathBuf::from("jobs").join(&hash);
        let record = match run_job(&job, &out.join(&rel)) {
            Ok(files) => JobRecord {
                hash: hash.clone(),
                params: job,
                status: JobStatus::Ok,
                outputs: files.iter().map(|f| rel.join(f).to_string_lossy().into_owned()).collect(),
                error: None,
            },
            Err(e) => {
                warn!("job {hash} failed: {e:#}");
                JobRecord { hash: hash.clone(), params: job, status: JobStatus::Failed, outputs: vec![], error: Some(format!("{e:#}")) }
            }
        };
        let mut m = shared.lock().expect("manifest lock");
        m.jobs.insert(hash, record);
        if let Err(e) = m.save(&manifest_path) {
            warn!("could not write manifest: {e:#}");
        }
    });
    let manifest = shared.into_inner().expect("manifest lock");
    manifest.save(&manifest_path)?;
    Ok(manifest)
}
