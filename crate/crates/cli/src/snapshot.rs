use std::fs;
use std::path::Path;

use anyhow::{bail, Result};
use mpschwarz::schwarz::IterationTrace;

/// An `n × n` grid in row-major CSV: line `i` holds grid row `i`, so entry
/// `(i, j)` is the unknown at `x₁ = (j+1)h`, `x₂ = (i+1)h`.
pub fn grid_csv(values: &[f64], n: usize) -> Result<String> {
    if values.len() != n * n {
        bail!("expected {} values for an {n} x {n} grid, got {}", n * n, values.len());
    }
    let mut s = String::with_capacity(values.len() * 24);
    for row in values.chunks(n) {
        let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&line.join(","));
        s.push('\n');
    }
    Ok(s)
}

/// Writes `snapshot_iter{k}.csv` for every requested iteration and returns
/// the file names.
pub fn export_error_snapshot(trace: &IterationTrace, iters: &[usize], n: usize, dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::with_capacity(iters.len());
    for &k in iters {
        let e = trace.error_snapshot(k)?;
        let name = format!("snapshot_iter{k}.csv");
        fs::write(dir.join(&name), grid_csv(e, n)?)?;
        names.push(name);
    }
    Ok(names)
}
