//! Matrix Market coordinate format (`real general`, 1-based indices).

use std::io::{BufRead, Write};

use super::SparseMatrix;
use crate::error::{Error, Result};

pub fn write_matrix_market<W: Write>(m: &SparseMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.n(), m.n(), m.nnz())?;
    for (i, j, v) in m.iter() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

/// Reads a square coordinate matrix. `symmetric` headers are expanded.
pub fn read_matrix_market<R: BufRead>(r: R) -> Result<SparseMatrix> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::MatrixMarket("empty input".into()))??;
    let h = header.to_ascii_lowercase();
    let tokens: Vec<&str> = h.split_whitespace().collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(Error::MatrixMarket(format!("unsupported header {header:?}")));
    }
    if !matches!(tokens[3], "real" | "integer") {
        return Err(Error::MatrixMarket(format!("unsupported field {}", tokens[3])));
    }
    let symmetric = match tokens[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(Error::MatrixMarket(format!("unsupported symmetry {other}"))),
    };
    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        if size.is_none() {
            if parts.len() != 3 {
                return Err(Error::MatrixMarket(format!("bad size line {t:?}")));
            }
            let p = |s: &str| s.parse::<usize>().map_err(|_| Error::MatrixMarket(format!("bad integer {s:?}")));
            size = Some((p(parts[0])?, p(parts[1])?, p(parts[2])?));
            continue;
        }
        if parts.len() != 3 {
            return Err(Error::MatrixMarket(format!("bad entry line {t:?}")));
        }
        let i: usize = parts[0].parse().map_err(|_| Error::MatrixMarket(format!("bad row {t:?}")))?;
        let j: usize = parts[1].parse().map_err(|_| Error::MatrixMarket(format!("bad column {t:?}")))?;
        let v: f64 = parts[2].parse().map_err(|_| Error::MatrixMarket(format!("bad value {t:?}")))?;
        if i == 0 || j == 0 {
            return Err(Error::MatrixMarket("indices are 1-based".into()));
        }
        triplets.push((i - 1, j - 1, v));
        if symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
    }
    let (rows, cols, nnz) = size.ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
    if rows != cols {
        return Err(Error::MatrixMarket(format!("matrix is {rows}x{cols}, square expected")));
    }
    let stored = if symmetric { triplets.iter().filter(|t| t.0 >= t.1).count() } else { triplets.len() };
    if stored != nnz {
        return Err(Error::MatrixMarket(format!("expected {nnz} entries, found {stored}")));
    }
    SparseMatrix::from_triplets(rows, triplets)
}
