//! Banded LU factorization with partial pivoting.
//!
//! The subdomain matrices produced by grid discretizations are banded with a
//! bandwidth equal to the strip width, so band storage is the natural sparse
//! format here. General matrices work too; their bandwidth just grows.
//!
//! Every arithmetic result can be passed through a rounding hook, which is
//! how fully simulated low-precision factorizations and solves are realized.

use serde::{Deserialize, Serialize};

use super::SparseMatrix;
use crate::error::{Error, Result};
use crate::fpsim::FloatFormat;

/// LU factors `P M = L U` in band storage.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LuFactors {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band: row `i` stores columns `i - kl ..= i + kl + ku`.
    band: Vec<f64>,
    pivots: Vec<usize>,
    /// Format whose rounding was applied to every operation.
    precision: FloatFormat,
}

impl LuFactors {
    #[inline]
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // Caller guarantees i - kl <= j <= i + kl + ku.
        i * self.width() + (j + self.kl - i)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn precision(&self) -> &FloatFormat {
        &self.precision
    }

    /// Solves `M x = b` in working precision.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.solve_rounded(b, |x| x)
    }

    /// Solves `M x = b` rounding every intermediate result with `fmt`.
    pub fn solve_in(&self, b: &[f64], fmt: &FloatFormat) -> Result<Vec<f64>> {
        if fmt.is_working_precision() {
            self.solve(b)
        } else {
            self.solve_rounded(b, |x| fmt.chop(x))
        }
    }

    fn solve_rounded(&self, b: &[f64], r: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: b.len() });
        }
        let n = self.n;
        let mut x: Vec<f64> = b.iter().map(|&v| r(v)).collect();
        // Forward: interleaved row swaps and unit-lower elimination.
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk == 0.0 {
                continue;
            }
            let last = (k + self.kl).min(n - 1);
            for i in k + 1..=last {
                let l = self.band[self.idx(i, k)];
                if l != 0.0 {
                    x[i] = r(x[i] - r(l * xk));
                }
            }
        }
        // Backward with the upper factor of bandwidth kl + ku.
        let uw = self.kl + self.ku;
        for i in (0..n).rev() {
            let last = (i + uw).min(n - 1);
            let mut s = x[i];
            for j in i + 1..=last {
                let u = self.band[self.idx(i, j)];
                if u != 0.0 {
                    s = r(s - r(u * x[j]));
                }
            }
            x[i] = r(s / self.band[self.idx(i, i)]);
        }
        Ok(x)
    }
}

/// Factorizes `m` in working precision.
pub fn lu_factor(m: &SparseMatrix) -> Result<LuFactors> {
    factor_rounded(m, FloatFormat::fp64(), |x| x)
}

/// Factorizes `m` with every operation rounded to `fmt` (nearest, chop
/// semantics). Entries of `m` are rounded on load.
pub fn lu_factor_in(m: &SparseMatrix, fmt: &FloatFormat) -> Result<LuFactors> {
    if fmt.is_working_precision() {
        lu_factor(m)
    } else {
        factor_rounded(m, *fmt, |x| fmt.chop(x))
    }
}

fn factor_rounded(m: &SparseMatrix, precision: FloatFormat, r: impl Fn(f64) -> f64) -> Result<LuFactors> {
    let n = m.n();
    let (kl, ku) = m.bandwidths();
    let mut f = LuFactors {
        n,
        kl,
        ku,
        band: vec![0.0; n * (2 * kl + ku + 1)],
        pivots: vec![0; n],
        precision,
    };
    for (i, j, v) in m.iter() {
        let k = f.idx(i, j);
        f.band[k] = r(v);
    }
    let uw = kl + ku;
    for k in 0..n {
        let last_row = (k + kl).min(n - 1);
        let mut p = k;
        let mut best = f.band[f.idx(k, k)].abs();
        for i in k + 1..=last_row {
            let a = f.band[f.idx(i, k)].abs();
            if a > best {
                best = a;
                p = i;
            }
        }
        f.pivots[k] = p;
        if best == 0.0 {
            return Err(Error::Singular { column: k });
        }
        let last_col = (k + uw).min(n - 1);
        if p != k {
            for j in k..=last_col {
                let a = f.idx(k, j);
                let b = f.idx(p, j);
                f.band.swap(a, b);
            }
        }
        let pivot = f.band[f.idx(k, k)];
        for i in k + 1..=last_row {
            let ik = f.idx(i, k);
            let a = f.band[ik];
            if a == 0.0 {
                continue;
            }
            let l = r(a / pivot);
            f.band[ik] = l;
            for j in k + 1..=last_col {
                let kj = f.band[f.idx(k, j)];
                if kj != 0.0 {
                    let ij = f.idx(i, j);
                    f.band[ij] = r(f.band[ij] - r(l * kj));
                }
            }
        }
    }
    Ok(f)
}

/// Solves with previously computed factors.
pub fn solve(f: &LuFactors, b: &[f64]) -> Result<Vec<f64>> {
    f.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tridiag;

    #[test]
    fn identity_solve() {
        let f = lu_factor(&SparseMatrix::identity(5)).unwrap();
        let b = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        assert_eq!(f.solve(&b).unwrap(), b);
    }

    #[test]
    fn laplacian_first_column_of_inverse() {
        // Oracle: inverse of tridiag(-1,2,-1) has (A^-1)_{ij} = min(i,j)(n+1-max(i,j))/(n+1).
        let f = lu_factor(&tridiag(4, -1.0, 2.0, -1.0)).unwrap();
        let x = f.solve(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        for (xi, e) in x.iter().zip([0.8, 0.6, 0.4, 0.2]) {
            assert!((xi - e).abs() < 1e-15);
        }
    }

    #[test]
    fn duplicate_rows_are_singular() {
        let m = SparseMatrix::from_triplets(3, vec![
            (0, 0, 1.0), (0, 1, 2.0), (0, 2, 3.0),
            (1, 0, 1.0), (1, 1, 2.0), (1, 2, 3.0),
            (2, 0, 4.0), (2, 1, 5.0), (2, 2, 7.0),
        ])
        .unwrap();
        assert!(matches!(lu_factor(&m), Err(Error::Singular { .. })));
    }

    #[test]
    fn pivoting_is_used() {
        // Zero leading entry requires a row swap.
        let m = SparseMatrix::from_triplets(2, vec![(0, 1, 1.0), (1, 0, 2.0), (1, 1, 1.0)]).unwrap();
        let x = lu_factor(&m).unwrap().solve(&[3.0, 4.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let f = lu_factor(&SparseMatrix::identity(3)).unwrap();
        assert!(matches!(f.solve(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn simulated_factorization_is_close() {
        let m = tridiag(10, -1.0, 2.5, -1.0);
        let fmt = FloatFormat::preset("fp16").unwrap();
        let f = lu_factor_in(&m, &fmt).unwrap();
        let b = vec![1.0; 10];
        let x = f.solve_in(&b, &fmt).unwrap();
        let exact = lu_factor(&m).unwrap().solve(&b).unwrap();
        for (a, e) in x.iter().zip(&exact) {
            assert!((a - e).abs() <= 1e-2 * e.abs());
            assert_eq!(fmt.chop(*a), *a, "results are representable");
        }
    }
}
