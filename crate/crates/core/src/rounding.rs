//! Structure-preserving rounding of scaled subdomain matrices.
//!
//! Each routine maps `𝒜` to a matrix `𝒜̃` whose entries are representable in
//! the target format and records the rounding error `F = 𝒜̃ - 𝒜`.
//! [`round_mmatrix`] rounds positive entries up and negative entries down in
//! magnitude so that `F ≥ 0` entrywise; [`round_diag`] keeps the diagonal
//! and shrinks off-diagonals, which preserves symmetry and diagonal
//! dominance; [`round_plain`] is round-to-nearest.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpsim::{FloatFormat, RoundMode, RoundStats};
use crate::linalg::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundingKind {
    MmatrixUp,
    DiagExact,
    PlainNearest,
}

impl std::str::FromStr for RoundingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mmatrix" | "mmatrixup" => Ok(RoundingKind::MmatrixUp),
            "diag" | "diagexact" => Ok(RoundingKind::DiagExact),
            "nearest" | "plain" | "plainnearest" => Ok(RoundingKind::PlainNearest),
            other => Err(Error::InvalidArgument(format!("unknown rounding routine {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundingRoutine {
    pub kind: RoundingKind,
    pub format: FloatFormat,
}

impl RoundingRoutine {
    pub fn new(kind: RoundingKind, format: FloatFormat) -> Self {
        RoundingRoutine { kind, format }
    }

    pub fn apply(&self, x: &SparseMatrix) -> Result<RoundedSubdomain> {
        match self.kind {
            RoundingKind::MmatrixUp => round_mmatrix(x, &self.format),
            RoundingKind::DiagExact => round_diag(x, &self.format),
            RoundingKind::PlainNearest => round_plain(x, &self.format),
        }
    }
}

/// A scaled subdomain matrix together with its rounded version.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundedSubdomain {
    pub a_scaled: SparseMatrix,
    pub a_rounded: SparseMatrix,
    /// `F = 𝒜̃ - 𝒜`, on the pattern of `𝒜`.
    pub f: SparseMatrix,
    pub stats: RoundStats,
    /// Entries that overflowed on round-up and were clamped to `x_max`.
    pub saturated: Vec<(usize, usize)>,
    /// Diagonal entries that `round_diag` kept although they are not
    /// representable in the target format.
    pub unrepresentable_diagonal: Vec<usize>,
    /// `Ã - A` can be recovered through the scaling data of the subdomain.
    pub e_unscaled_available: bool,
}

impl RoundedSubdomain {
    fn new(a_scaled: &SparseMatrix, a_rounded: SparseMatrix, stats: RoundStats) -> Self {
        let f_vals = a_rounded.values().iter().zip(a_scaled.values()).map(|(r, s)| r - s).collect();
        RoundedSubdomain {
            f: a_scaled.with_values(f_vals),
            a_scaled: a_scaled.clone(),
            a_rounded,
            stats,
            saturated: Vec::new(),
            unrepresentable_diagonal: Vec::new(),
            e_unscaled_available: true,
        }
    }
}

/// Sign-informed round-up: positives away from zero, negatives toward zero.
///
/// Overflow on round-up saturates to `x_max` with a warning.
pub fn round_mmatrix(x: &SparseMatrix, fmt: &FloatFormat) -> Result<RoundedSubdomain> {
    let mut stats = RoundStats::default();
    let mut saturated = Vec::new();
    let out = x.map_entries(|i, j, v| {
        let mode = if v > 0.0 { RoundMode::AwayFromZero } else { RoundMode::TowardZero };
        let r = fmt.round_detailed(v, mode);
        stats.underflows += r.underflow as usize;
        if r.overflow {
            stats.overflows += 1;
            saturated.push((i, j));
            fmt.x_max().copysign(v)
        } else {
            r.value
        }
    });
    if !saturated.is_empty() {
        warn!("{} entries saturated at x_max while rounding to {fmt}", saturated.len());
    }
    let mut rs = RoundedSubdomain::new(x, out, stats);
    rs.saturated = saturated;
    Ok(rs)
}

/// Keeps the diagonal, rounds off-diagonal entries toward zero.
pub fn round_diag(x: &SparseMatrix, fmt: &FloatFormat) -> Result<RoundedSubdomain> {
    let mut stats = RoundStats::default();
    let mut saturated = Vec::new();
    let mut bad_diag = Vec::new();
    let out = x.map_entries(|i, j, v| {
        if i == j {
            if fmt.round_detailed(v, RoundMode::Nearest).value != v {
                bad_diag.push(i);
            }
            return v;
        }
        let r = fmt.round_detailed(v, RoundMode::TowardZero);
        stats.underflows += r.underflow as usize;
        if r.overflow {
            stats.overflows += 1;
            saturated.push((i, j));
            fmt.x_max().copysign(v)
        } else {
            r.value
        }
    });
    if !bad_diag.is_empty() {
        warn!("{} diagonal entries are not representable in {fmt}; kept in working precision", bad_diag.len());
    }
    let mut rs = RoundedSubdomain::new(x, out, stats);
    rs.saturated = saturated;
    rs.unrepresentable_diagonal = bad_diag;
    Ok(rs)
}

/// Round-to-nearest on every entry. Overflow is an error.
pub fn round_plain(x: &SparseMatrix, fmt: &FloatFormat) -> Result<RoundedSubdomain> {
    let (out, stats) = crate::fpsim::round_matrix(x, fmt, RoundMode::Nearest)?;
    Ok(RoundedSubdomain::new(x, out, stats))
}
