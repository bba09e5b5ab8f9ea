use serde::{Deserialize, Serialize};

use super::dense::{dense_inverse, DenseCap};
use super::SparseMatrix;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckMode {
    /// Sign pattern plus weakly chained diagonal dominance.
    Sufficient,
    /// Sign pattern plus an explicit entrywise check of the dense inverse.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MMatrixReport {
    pub mode: CheckMode,
    pub z_pattern: bool,
    pub positive_diagonal: bool,
    /// Every row weakly dominant and each row reaches a strictly dominant
    /// row through the adjacency graph.
    pub chained_dominance: bool,
    /// Smallest entry of the inverse (Exact mode only).
    pub min_inverse_entry: Option<f64>,
    pub is_m_matrix: bool,
}

/// Classifies `m` as a nonsingular M-matrix.
///
/// Sufficient mode uses the weakly chained diagonal dominance criterion,
/// which contains strict and irreducible diagonal dominance as special
/// cases. Exact mode checks `m⁻¹ ≥ -τ` with `τ = 1e-12 · max|m⁻¹|`.
pub fn is_m_matrix(m: &SparseMatrix, mode: CheckMode, cap: DenseCap) -> Result<MMatrixReport> {
    let n = m.n();
    let z_pattern = m.iter().all(|(i, j, v)| i == j || v <= 0.0);
    let diag = m.diagonal();
    let positive_diagonal = diag.iter().all(|&d| d > 0.0);
    let chained_dominance = positive_diagonal && chained_dominance(m, &diag);
    let mut report = MMatrixReport {
        mode,
        z_pattern,
        positive_diagonal,
        chained_dominance,
        min_inverse_entry: None,
        is_m_matrix: false,
    };
    match mode {
        CheckMode::Sufficient => {
            report.is_m_matrix = z_pattern && positive_diagonal && chained_dominance;
        }
        CheckMode::Exact => {
            cap.check(n)?;
            let inv = match dense_inverse(&m.to_dense(), cap) {
                Ok(inv) => inv,
                Err(crate::Error::Singular { .. }) => return Ok(report),
                Err(e) => return Err(e),
            };
            let min = inv.min();
            let scale = inv.amax();
            report.min_inverse_entry = Some(min);
            report.is_m_matrix = z_pattern && min >= -1e-12 * scale;
        }
    }
    Ok(report)
}

fn chained_dominance(m: &SparseMatrix, diag: &[f64]) -> bool {
    let n = m.n();
    let mut strict = vec![false; n];
    for i in 0..n {
        let (cols, vals) = m.row(i);
        let off: f64 = cols.iter().zip(vals).filter(|(&j, _)| j != i).map(|(_, v)| v.abs()).sum();
        let slack = diag[i] - off;
        let tol = 16.0 * f64::EPSILON * (diag[i] + off);
        if slack < -tol {
            return false;
        }
        strict[i] = slack > tol;
    }
    // Rows reach a strictly dominant row if they are reachable from one in
    // the reversed graph: BFS from strict rows along reversed edges.
    let t = m.transpose();
    let mut reached = strict.clone();
    let mut queue: std::collections::VecDeque<usize> = (0..n).filter(|&i| strict[i]).collect();
    while let Some(j) = queue.pop_front() {
        // Row i has an edge to j if m[i][j] != 0, i.e. i is in column j.
        let (rows, vals) = t.row(j);
        for (&i, &v) in rows.iter().zip(vals) {
            if v != 0.0 && !reached[i] {
                reached[i] = true;
                queue.push_back(i);
            }
        }
    }
    reached.iter().all(|&r| r)
}
