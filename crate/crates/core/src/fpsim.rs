//! Simulated reduced-precision value sets.
//!
//! Values are always carried as `f64`; a [`FloatFormat`] describes which
//! subset of `f64` is "representable" and rounding maps an arbitrary finite
//! `f64` onto that subset. Binary formats are simulated chop-style by
//! truncating or incrementing the significand on the working-precision bit
//! pattern. Decimal formats keep `d` significant base-10 digits and have no
//! range limits.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Kind of simulated arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormatKind {
    Binary,
    Decimal,
}

/// Rounding direction.
///
/// `TowardZero` and `AwayFromZero` are the two directed modes used by the
/// structure-preserving rounding routines (round down / round up in
/// magnitude).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoundMode {
    Nearest,
    TowardZero,
    AwayFromZero,
}

/// A simulated floating-point format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloatFormat {
    kind: FormatKind,
    /// Binary: significand bits including the implicit bit. Decimal: digits.
    precision: u32,
    /// Binary only; 0 for decimal formats.
    exponent_bits: u32,
    subnormals: bool,
    unit_roundoff: f64,
    x_min: f64,
    x_max: f64,
    emin: i32,
}

/// Result of rounding one scalar, including range events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRound {
    pub value: f64,
    pub overflow: bool,
    pub underflow: bool,
}

/// Counters of range events accumulated while rounding many values.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStats {
    pub overflows: usize,
    pub underflows: usize,
}

impl RoundStats {
    pub fn merge(&mut self, other: &RoundStats) {
        self.overflows += other.overflows;
        self.underflows += other.underflows;
    }
}

/// Names of the binary presets, ordered from lowest to highest precision.
pub const BINARY_PRESETS: [&str; 6] = ["q52", "q43", "bfloat16", "fp16", "fp32", "fp64"];

impl FloatFormat {
    /// A binary format with `significand_bits` (including the implicit bit)
    /// and `exponent_bits`, IEEE-style exponent range and subnormals enabled.
    pub fn binary(significand_bits: u32, exponent_bits: u32) -> Result<Self> {
        if !(1..=53).contains(&significand_bits) {
            return Err(Error::InvalidFormat(format!(
                "significand bits must be in 1..=53, got {significand_bits}"
            )));
        }
        if !(2..=11).contains(&exponent_bits) {
            return Err(Error::InvalidFormat(format!(
                "exponent bits must be in 2..=11, got {exponent_bits}"
            )));
        }
        let bias = (1i32 << (exponent_bits - 1)) - 1;
        let emax = bias;
        let emin = 1 - bias;
        let t = significand_bits as i32;
        let x_max = 2f64.powi(emax) * (2.0 - 2f64.powi(1 - t));
        Ok(FloatFormat {
            kind: FormatKind::Binary,
            precision: significand_bits,
            exponent_bits,
            subnormals: true,
            unit_roundoff: 2f64.powi(-t),
            x_min: 2f64.powi(emin),
            x_max,
            emin,
        })
    }

    /// A decimal format keeping `digits` significant digits.
    pub fn decimal(digits: u32) -> Result<Self> {
        if !(1..=16).contains(&digits) {
            return Err(Error::InvalidFormat(format!(
                "decimal digits must be in 1..=16, got {digits}"
            )));
        }
        Ok(FloatFormat {
            kind: FormatKind::Decimal,
            precision: digits,
            exponent_bits: 0,
            subnormals: false,
            unit_roundoff: 0.5 * 10f64.powi(1 - digits as i32),
            x_min: f64::MIN_POSITIVE,
            x_max: f64::MAX,
            emin: f64::MIN_EXP - 1,
        })
    }

    /// The working precision (IEEE binary64).
    pub fn fp64() -> Self {
        Self::binary(53, 11).expect("fp64 is valid")
    }

    /// Looks up a named preset: `q52`, `q43`, `bfloat16`, `fp16`, `fp32`,
    /// `fp64`, or `dec:<k>` for `k` in 1..=16.
    pub fn preset(name: &str) -> Result<Self> {
        let name = name.trim();
        match name.to_ascii_lowercase().as_str() {
            // FP8 E5M2 and E4M3.
            "q52" => Self::binary(3, 5),
            "q43" => Self::binary(4, 4),
            "bfloat16" | "bf16" => Self::binary(8, 8),
            "fp16" | "half" => Self::binary(11, 5),
            "fp32" | "single" => Self::binary(24, 8),
            "fp64" | "double" => Ok(Self::fp64()),
            other => {
                if let Some(k) = other.strip_prefix("dec:") {
                    let digits: u32 = k
                        .parse()
                        .map_err(|_| Error::InvalidFormat(format!("bad digit count in {name:?}")))?;
                    Self::decimal(digits)
                } else {
                    Err(Error::InvalidFormat(format!("unknown format {name:?}")))
                }
            }
        }
    }

    pub fn with_subnormals(mut self, enabled: bool) -> Self {
        if self.kind == FormatKind::Binary {
            self.subnormals = enabled;
        }
        self
    }

    pub fn kind(&self) -> FormatKind {
        self.kind
    }

    /// Significand bits (binary) or significant digits (decimal).
    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn significand_bits(&self) -> Option<u32> {
        (self.kind == FormatKind::Binary).then_some(self.precision)
    }

    pub fn exponent_bits(&self) -> Option<u32> {
        (self.kind == FormatKind::Binary).then_some(self.exponent_bits)
    }

    pub fn decimal_digits(&self) -> Option<u32> {
        (self.kind == FormatKind::Decimal).then_some(self.precision)
    }

    pub fn unit_roundoff(&self) -> f64 {
        self.unit_roundoff
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn subnormals_enabled(&self) -> bool {
        self.subnormals
    }

    /// True when rounding to this format is the identity on `f64`.
    pub fn is_working_precision(&self) -> bool {
        self.kind == FormatKind::Binary && self.precision == 53 && self.exponent_bits == 11
    }

    /// Canonical name; presets round-trip through [`FloatFormat::preset`].
    pub fn name(&self) -> String {
        match self.kind {
            FormatKind::Decimal => format!("dec:{}", self.precision),
            FormatKind::Binary => match (self.precision, self.exponent_bits) {
                (3, 5) => "q52".into(),
                (4, 4) => "q43".into(),
                (8, 8) => "bfloat16".into(),
                (11, 5) => "fp16".into(),
                (24, 8) => "fp32".into(),
                (53, 11) => "fp64".into(),
                (t, e) => format!("bin:{t}:{e}"),
            },
        }
    }

    /// Rounds `x`, reporting overflow as an error. Underflow is silent.
    pub fn round(&self, x: f64, mode: RoundMode) -> Result<f64> {
        let r = self.round_detailed(x, mode);
        if r.overflow {
            Err(Error::Overflow { value: x, format: self.name() })
        } else {
            Ok(r.value)
        }
    }

    /// Rounds `x` and reports range events. On overflow `value` is the
    /// signed infinity that IEEE arithmetic would produce.
    pub fn round_detailed(&self, x: f64, mode: RoundMode) -> ScalarRound {
        let value = match self.kind {
            FormatKind::Binary => self.round_binary(x, mode),
            FormatKind::Decimal => round_decimal(x, self.precision, mode),
        };
        let overflow = self.kind == FormatKind::Binary && (x.abs() > self.x_max || value.abs() > self.x_max);
        let underflow = x != 0.0 && value == 0.0;
        ScalarRound {
            value: if overflow { f64::INFINITY.copysign(x) } else { value },
            overflow,
            underflow,
        }
    }

    /// Nearest rounding without range checks, used for flop-level simulation.
    #[inline]
    pub fn chop(&self, x: f64) -> f64 {
        match self.kind {
            FormatKind::Binary if self.is_working_precision() => x,
            FormatKind::Binary => {
                let v = self.round_binary(x, RoundMode::Nearest);
                if v.abs() > self.x_max {
                    f64::INFINITY.copysign(x)
                } else {
                    v
                }
            }
            FormatKind::Decimal => round_decimal(x, self.precision, RoundMode::Nearest),
        }
    }

    fn round_binary(&self, x: f64, mode: RoundMode) -> f64 {
        if x == 0.0 || !x.is_finite() || self.is_working_precision() {
            return x;
        }
        let a = x.abs();
        let t = self.precision as i32;
        if a < self.x_min && !self.subnormals {
            let r = match mode {
                RoundMode::TowardZero => 0.0,
                RoundMode::AwayFromZero => self.x_min,
                RoundMode::Nearest => {
                    if a >= 0.5 * self.x_min {
                        self.x_min
                    } else {
                        0.0
                    }
                }
            };
            return r.copysign(x);
        }
        let e = exponent_of(a).max(self.emin);
        // Spacing of representable numbers in the binade of `a`.
        let quantum_exp = e - t + 1;
        let scaled = ldexp(a, -quantum_exp);
        let m = match mode {
            RoundMode::TowardZero => scaled.floor(),
            RoundMode::AwayFromZero => scaled.ceil(),
            RoundMode::Nearest => round_half_even(scaled),
        };
        ldexp(m, quantum_exp).copysign(x)
    }
}

impl fmt::Display for FloatFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FloatFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::preset(s)
    }
}

/// Rounds a scalar to `fmt` with `mode`.
pub fn round_scalar(x: f64, fmt: &FloatFormat, mode: RoundMode) -> Result<f64> {
    fmt.round(x, mode)
}

/// Rounds every stored entry of `x`; the sparsity pattern is unchanged.
///
/// Overflowing entries are collected and reported together.
pub fn round_matrix(x: &SparseMatrix, fmt: &FloatFormat, mode: RoundMode) -> Result<(SparseMatrix, RoundStats)> {
    round_matrix_with(x, fmt, |_| mode)
}

/// Like [`round_matrix`] with a per-value choice of rounding mode.
pub(crate) fn round_matrix_with(
    x: &SparseMatrix,
    fmt: &FloatFormat,
    mode_of: impl Fn(f64) -> RoundMode,
) -> Result<(SparseMatrix, RoundStats)> {
    let mut stats = RoundStats::default();
    let mut overflowed = Vec::new();
    let out = x.map_entries(|i, j, v| {
        let r = fmt.round_detailed(v, mode_of(v));
        stats.underflows += r.underflow as usize;
        if r.overflow {
            stats.overflows += 1;
            overflowed.push((i, j));
        }
        r.value
    });
    if overflowed.is_empty() {
        Ok((out, stats))
    } else {
        Err(Error::MatrixOverflow { entries: overflowed, format: fmt.name() })
    }
}

/// Dense counterpart of [`round_matrix`].
pub fn round_dense(x: &DMatrix<f64>, fmt: &FloatFormat, mode: RoundMode) -> Result<(DMatrix<f64>, RoundStats)> {
    let mut stats = RoundStats::default();
    let mut overflowed = Vec::new();
    let mut out = x.clone();
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            let r = fmt.round_detailed(x[(i, j)], mode);
            stats.underflows += r.underflow as usize;
            if r.overflow {
                stats.overflows += 1;
                overflowed.push((i, j));
            }
            out[(i, j)] = r.value;
        }
    }
    if overflowed.is_empty() {
        Ok((out, stats))
    } else {
        Err(Error::MatrixOverflow { entries: overflowed, format: fmt.name() })
    }
}

/// Unbiased binary exponent of a positive finite value (subnormals included).
fn exponent_of(a: f64) -> i32 {
    let bits = a.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i32;
    if biased == 0 {
        // Subnormal f64: exponent from the leading significand bit.
        let mant = bits & ((1u64 << 52) - 1);
        -1022 - (mant.leading_zeros() as i32 - 11)
    } else {
        biased - 1023
    }
}

/// `x * 2^k` computed exactly when the result is representable.
fn ldexp(x: f64, k: i32) -> f64 {
    // Split the scaling so intermediate powers stay normal.
    let mut x = x;
    let mut k = k;
    while k > 1000 {
        x *= 2f64.powi(1000);
        k -= 1000;
    }
    while k < -1000 {
        x *= 2f64.powi(-1000);
        k += 1000;
    }
    x * 2f64.powi(k)
}

fn round_half_even(x: f64) -> f64 {
    let r = x.round();
    if (r - x).abs() == 0.5 && r % 2.0 != 0.0 {
        r - (r - x).signum()
    } else {
        r
    }
}

/// Correctly rounded `m * 10^k`.
fn decimal_value(m: u64, k: i32) -> f64 {
    // Both factors are exact doubles below 2^53 and 10^22, so one multiply
    // or divide rounds correctly.
    if m <= 1 << 53 && (0..=22).contains(&k) {
        m as f64 * 10f64.powi(k)
    } else if m <= 1 << 53 && (-22..0).contains(&k) {
        m as f64 / 10f64.powi(-k)
    } else {
        format!("{m}e{k}").parse().unwrap_or(f64::INFINITY)
    }
}

/// Rounds `x` to `digits` significant decimal digits.
///
/// The value set is `{ fl64(m * 10^k) }` with `m` an integer of at most
/// `digits` digits. Directed modes are exact with respect to this set.
fn round_decimal(x: f64, digits: u32, mode: RoundMode) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let a = x.abs();
    let d = digits as i32;
    let mut e = a.log10().floor() as i32;
    // log10 may be off by one near powers of ten.
    if decimal_value(1, e) > a {
        e -= 1;
    } else if decimal_value(1, e + 1) <= a {
        e += 1;
    }
    let k = e - d + 1;
    let lo_m = 10u64.pow(d as u32 - 1);
    let hi_m = 10u64.pow(d as u32);
    let scaled = if k >= 0 { a / 10f64.powi(k) } else { a * 10f64.powi(-k) };
    // Integer mantissas: above 2^53 an f64 counter would stop advancing.
    let mut m = (scaled.floor() as u64).clamp(lo_m, hi_m - 1);
    // Fix `m` so that value(m) <= a < value(m + 1).
    while m > lo_m && decimal_value(m, k) > a {
        m -= 1;
    }
    while decimal_value(m + 1, k) <= a {
        m += 1;
    }
    let below = decimal_value(m, k);
    if below == a {
        return x;
    }
    let above = decimal_value(m + 1, k);
    let r = match mode {
        RoundMode::TowardZero => below,
        RoundMode::AwayFromZero => above,
        RoundMode::Nearest => {
            let db = a - below;
            let da = above - a;
            // Ties go away from zero.
            if da <= db {
                above
            } else {
                below
            }
        }
    };
    r.copysign(x)
}
