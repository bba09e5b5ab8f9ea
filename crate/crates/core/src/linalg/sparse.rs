use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square matrix in compressed sparse row form.
///
/// Column indices are sorted within each row and unique. Explicit zeros are
/// allowed and are preserved by elementwise maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, v) in &entries {
            if i >= n || j >= n {
                return Err(Error::InvalidMatrix(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidMatrix(format!("non-finite value at ({i}, {j})")));
            }
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            values.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(SparseMatrix { n, row_ptr, col_idx, values })
    }

    /// Builds directly from CSR arrays, validating the invariants.
    pub fn from_csr(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if row_ptr.len() != n + 1 || row_ptr[0] != 0 || *row_ptr.last().unwrap() != col_idx.len() {
            return Err(Error::InvalidMatrix("malformed row pointer".into()));
        }
        if col_idx.len() != values.len() {
            return Err(Error::InvalidMatrix("column/value length mismatch".into()));
        }
        for i in 0..n {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(Error::InvalidMatrix("row pointer not monotone".into()));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&j| j >= n) {
                return Err(Error::InvalidMatrix(format!("row {i}: unsorted, duplicate or out-of-range columns")));
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite value".into()));
        }
        Ok(SparseMatrix { n, row_ptr, col_idx, values })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Keeps the nonzero entries of a dense square matrix.
    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "square matrix expected");
        let n = m.nrows();
        let triplets = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter_map(|(i, j)| (m[(i, j)] != 0.0).then(|| (i, j, m[(i, j)])));
        Self::from_triplets(n, triplets).expect("dense entries are valid")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for (i, j, v) in self.iter() {
            d[(i, j)] = v;
        }
        d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    /// Iterates over stored `(row, col, value)` entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = self * x`.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y = selfᵀ * x`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (i, j, v) in self.iter() {
            y[j] += v * x[i];
        }
        y
    }

    pub fn transpose(&self) -> SparseMatrix {
        Self::from_triplets(self.n, self.iter().map(|(i, j, v)| (j, i, v))).expect("valid")
    }

    /// Applies `f(row, col, value)` to every stored entry, keeping the pattern.
    pub fn map_entries(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> SparseMatrix {
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                values.push(f(i, j, v));
            }
        }
        SparseMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        }
    }

    /// Same pattern, new values (length must match `nnz`).
    pub fn with_values(&self, values: Vec<f64>) -> SparseMatrix {
        assert_eq!(values.len(), self.nnz());
        SparseMatrix {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        }
    }

    /// Entrywise difference over the union of patterns.
    pub fn sub(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.n, other.n);
        Self::from_triplets(self.n, self.iter().chain(other.iter().map(|(i, j, v)| (i, j, -v))))
            .expect("valid")
    }

    pub fn scale(&self, s: f64) -> SparseMatrix {
        self.map_entries(|_, _, v| s * v)
    }

    /// `diag(left) * self * diag(right)`.
    pub fn scale_rows_cols(&self, left: &[f64], right: &[f64]) -> SparseMatrix {
        self.map_entries(|i, j, v| left[i] * v * right[j])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Bitwise symmetry of values and pattern.
    pub fn is_symmetric(&self) -> bool {
        self.iter().all(|(i, j, v)| {
            let (cols, vals) = self.row(j);
            match cols.binary_search(&i) {
                Ok(k) => vals[k].to_bits() == v.to_bits() || (vals[k] == 0.0 && v == 0.0),
                Err(_) => v == 0.0,
            }
        })
    }

    /// Lower and upper bandwidths `(kl, ku)` of the stored pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        self.iter().fold((0, 0), |(kl, ku), (i, j, _)| {
            if i > j {
                (kl.max(i - j), ku)
            } else {
                (kl, ku.max(j - i))
            }
        })
    }

    /// Extracts the submatrix with the given sorted row and column index
    /// sets (rectangular in general, returned as triplets in local indices).
    pub fn extract(&self, rows: &[usize], cols: &[usize]) -> Vec<(usize, usize, f64)> {
        let mut col_map = vec![usize::MAX; self.n];
        for (local, &g) in cols.iter().enumerate() {
            col_map[g] = local;
        }
        let mut out = Vec::new();
        for (li, &gi) in rows.iter().enumerate() {
            let (cs, vs) = self.row(gi);
            for (&gj, &v) in cs.iter().zip(vs) {
                let lj = col_map[gj];
                if lj != usize::MAX {
                    out.push((li, lj, v));
                }
            }
        }
        out
    }

    /// Principal submatrix on the sorted index set `idx`.
    pub fn principal_submatrix(&self, idx: &[usize]) -> SparseMatrix {
        Self::from_triplets(idx.len(), self.extract(idx, idx)).expect("valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let m = SparseMatrix::from_triplets(2, vec![(1, 0, 1.0), (0, 1, 2.0), (0, 1, 3.0), (0, 0, 4.0)]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.get(0, 1), 5.0);
        assert_eq!(m.row(0).0, &[0, 1]);
        assert_eq!(m.matvec(&[1.0, 1.0]), vec![9.0, 1.0]);
        assert_eq!(m.matvec_transpose(&[1.0, 1.0]), vec![5.0, 5.0]);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(SparseMatrix::from_triplets(2, vec![(2, 0, 1.0)]).is_err());
        assert!(SparseMatrix::from_triplets(2, vec![(0, 0, f64::NAN)]).is_err());
        assert!(SparseMatrix::from_csr(2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn submatrix_and_bandwidth() {
        let t = crate::linalg::tridiag(6, -1.0, 2.0, -1.0);
        assert_eq!(t.bandwidths(), (1, 1));
        let s = t.principal_submatrix(&[0, 1, 2, 3]);
        assert_eq!(s.to_dense(), crate::linalg::tridiag(4, -1.0, 2.0, -1.0).to_dense());
        assert!(t.is_symmetric());
    }
}
