//! Overlapping index-set decompositions and the restriction/prolongation
//! operators built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::pde::GridSpec;

/// Subdomain index sets.
///
/// `sets[i]` is the overlapping set `W_i`, `owned[i]` the non-overlapping
/// set `W̄_i ⊆ W_i` used by the restricted prolongation. Indices are 0-based
/// and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub size: usize,
    pub sets: Vec<Vec<usize>>,
    pub owned: Vec<Vec<usize>>,
    /// Number of colors: subdomains that intersect or are directly coupled
    /// never share a color.
    pub q: usize,
    /// How indices inside overlaps were assigned to the owned sets.
    pub ownership_rule: String,
}

impl Partition {
    /// Builds and validates a partition. `conflict(i, j)` adds coloring
    /// constraints beyond set intersection.
    pub fn new(
        size: usize,
        sets: Vec<Vec<usize>>,
        owned: Vec<Vec<usize>>,
        conflict: impl Fn(usize, usize) -> bool,
        ownership_rule: &str,
    ) -> Result<Self> {
        if sets.len() != owned.len() || sets.is_empty() {
            return Err(Error::InvalidPartition("need one owned set per subdomain".into()));
        }
        let mut owner = vec![usize::MAX; size];
        for (i, (w, wb)) in sets.iter().zip(&owned).enumerate() {
            if !w.windows(2).all(|p| p[0] < p[1]) || !wb.windows(2).all(|p| p[0] < p[1]) {
                return Err(Error::InvalidPartition(format!("subdomain {i}: index sets must be sorted")));
            }
            if w.last().is_some_and(|&k| k >= size) {
                return Err(Error::InvalidPartition(format!("subdomain {i}: index out of range")));
            }
            for &k in wb {
                if w.binary_search(&k).is_err() {
                    return Err(Error::InvalidPartition(format!("subdomain {i}: owned index {k} not in W_{i}")));
                }
                if owner[k] != usize::MAX {
                    return Err(Error::InvalidPartition(format!("index {k} owned twice")));
                }
                owner[k] = i;
            }
        }
        if let Some(k) = owner.iter().position(|&o| o == usize::MAX) {
            return Err(Error::InvalidPartition(format!("index {k} is not owned by any subdomain")));
        }
        let p = sets.len();
        let intersects = |i: usize, j: usize| {
            let (a, b) = (&sets[i], &sets[j]);
            let (mut x, mut y) = (0, 0);
            while x < a.len() && y < b.len() {
                match a[x].cmp(&b[y]) {
                    std::cmp::Ordering::Less => x += 1,
                    std::cmp::Ordering::Greater => y += 1,
                    std::cmp::Ordering::Equal => return true,
                }
            }
            false
        };
        // Greedy coloring in subdomain order.
        let mut color = vec![usize::MAX; p];
        for i in 0..p {
            let used: Vec<usize> =
                (0..i).filter(|&j| intersects(i, j) || conflict(i, j) || conflict(j, i)).map(|j| color[j]).collect();
            color[i] = (0..).find(|c| !used.contains(c)).expect("some color is free");
        }
        let q = color.iter().max().map_or(1, |c| c + 1);
        Ok(Partition { size, sets, owned, q, ownership_rule: ownership_rule.into() })
    }

    pub fn p(&self) -> usize {
        self.sets.len()
    }

    /// `N_i`.
    pub fn len(&self, i: usize) -> usize {
        self.sets[i].len()
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// `R_i v`.
    pub fn restrict(&self, v: &[f64], i: usize) -> Result<Vec<f64>> {
        if v.len() != self.size {
            return Err(Error::DimensionMismatch { expected: self.size, got: v.len() });
        }
        Ok(self.sets[i].iter().map(|&k| v[k]).collect())
    }

    /// `R_iᵀ w`, or `R̄_iᵀ w` when `restricted` (entries of `w` outside
    /// `W̄_i` are dropped).
    pub fn prolong(&self, w: &[f64], i: usize, restricted: bool) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.size];
        self.prolong_add(w, i, restricted, 1.0, &mut out)?;
        Ok(out)
    }

    /// `out += s · R_iᵀ w` (or `R̄_iᵀ`).
    pub fn prolong_add(&self, w: &[f64], i: usize, restricted: bool, s: f64, out: &mut [f64]) -> Result<()> {
        let set = &self.sets[i];
        if w.len() != set.len() {
            return Err(Error::DimensionMismatch { expected: set.len(), got: w.len() });
        }
        if restricted {
            let owned = &self.owned[i];
            let mut o = 0;
            for (&k, &x) in set.iter().zip(w) {
                if o < owned.len() && owned[o] == k {
                    out[k] += s * x;
                    o += 1;
                }
            }
        } else {
            for (&k, &x) in set.iter().zip(w) {
                out[k] += s * x;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// `p` vertical strips of grid columns, each extended by `overlap_lines`
/// columns on every interior side.
///
/// The owned sets split the columns at the strip boundaries, which assigns
/// overlap unknowns to the subdomain whose interior is closer.
pub fn strip_partition(grid: GridSpec, p: usize, overlap_lines: usize) -> Result<Partition> {
    let n = grid.n;
    if p == 0 || p > n {
        return Err(Error::InvalidPartition(format!("cannot cut {n} grid columns into {p} strips")));
    }
    // Strip boundaries: the first `n % p` strips get one extra column,
    // the two-strip split is at ceil(n/2).
    let bounds: Vec<usize> = (0..=p).map(|s| (s * n).div_ceil(p)).collect();
    let mut sets = Vec::with_capacity(p);
    let mut owned = Vec::with_capacity(p);
    for s in 0..p {
        let (lo, hi) = (bounds[s], bounds[s + 1]);
        if lo == hi {
            return Err(Error::InvalidPartition("empty strip".into()));
        }
        let left = if s > 0 { lo.checked_sub(overlap_lines) } else { Some(lo) };
        let right = if s + 1 < p { Some(hi + overlap_lines) } else { Some(hi) };
        let (Some(left), Some(right)) = (left, right) else {
            return Err(Error::InvalidPartition(format!("overlap of {overlap_lines} lines exceeds the domain")));
        };
        if right > n {
            return Err(Error::InvalidPartition(format!("overlap of {overlap_lines} lines exceeds the domain")));
        }
        let cols = |a: usize, b: usize| -> Vec<usize> {
            (0..n).flat_map(|row| (a..b).map(move |col| grid.index(row, col))).collect::<Vec<_>>()
        };
        let mut w = cols(left, right);
        w.sort_unstable();
        let mut wb = cols(lo, hi);
        wb.sort_unstable();
        sets.push(w);
        owned.push(wb);
    }
    // Neighbouring strips are coupled through the 5-point stencil even
    // without overlap.
    Partition::new(grid.size(), sets, owned, |i, j| i.abs_diff(j) == 1, "split at strip boundaries (nearest interior)")
}

/// Two vertical strips split at column `ceil(n/2)`.
pub fn two_domain_partition(grid: GridSpec, overlap_lines: usize) -> Result<Partition> {
    strip_partition(grid, 2, overlap_lines)
}

/// Partition with a single subdomain covering everything.
pub fn whole_domain(size: usize) -> Partition {
    let all: Vec<usize> = (0..size).collect();
    Partition::new(size, vec![all.clone()], vec![all], |_, _| false, "single subdomain").expect("valid")
}

/// Blocks of `A` seen from subdomain `i`.
#[derive(Debug, Clone)]
pub struct SubdomainBlocks {
    /// `A_i = R_i A R_iᵀ`.
    pub a_i: SparseMatrix,
    /// Global indices outside `W_i`, sorted.
    pub exterior: Vec<usize>,
    /// Coupling block `K_i` (rows `W_i`, columns `exterior`) in local indices.
    pub k_i: Vec<(usize, usize, f64)>,
    /// Coupling block `L_i` (rows `exterior`, columns `W_i`).
    pub l_i: Vec<(usize, usize, f64)>,
}

pub fn subdomain_blocks(a: &SparseMatrix, part: &Partition, i: usize) -> Result<SubdomainBlocks> {
    if a.n() != part.size {
        return Err(Error::DimensionMismatch { expected: part.size, got: a.n() });
    }
    let set = &part.sets[i];
    let mut inside = vec![false; part.size];
    set.iter().for_each(|&k| inside[k] = true);
    let exterior: Vec<usize> = (0..part.size).filter(|&k| !inside[k]).collect();
    Ok(SubdomainBlocks {
        a_i: a.principal_submatrix(set),
        k_i: a.extract(set, &exterior),
        l_i: a.extract(&exterior, set),
        exterior,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tridiag;

    fn six() -> Partition {
        Partition::new(6, vec![vec![0, 1, 2, 3], vec![2, 3, 4, 5]], vec![vec![0, 1, 2], vec![3, 4, 5]], |_, _| false, "")
            .unwrap()
    }

    #[test]
    fn hand_written_operators() {
        let p = six();
        // R_1 as a 0/1 matrix: rows pick 0..4.
        for k in 0..6 {
            let mut e = vec![0.0; 6];
            e[k] = 1.0;
            let r1 = p.restrict(&e, 0).unwrap();
            let expect: Vec<f64> = (0..4).map(|r| if r == k { 1.0 } else { 0.0 }).collect();
            assert_eq!(r1, expect);
        }
        let w = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(p.prolong(&w, 1, false).unwrap(), vec![0.0, 0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.prolong(&w, 1, true).unwrap(), vec![0.0, 0.0, 0.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.prolong(&w, 0, true).unwrap(), vec![1.0, 2.0, 3.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.q, 2);
    }

    #[test]
    fn restricted_prolongations_sum_to_identity() {
        let p = six();
        let v = [0.3, -1.0, 2.5, 7.0, 1e-3, 4.0];
        let mut s = vec![0.0; 6];
        for i in 0..2 {
            p.prolong_add(&p.restrict(&v, i).unwrap(), i, true, 1.0, &mut s).unwrap();
        }
        assert_eq!(s, v.to_vec());
    }

    #[test]
    fn invalid_partitions() {
        assert!(Partition::new(3, vec![vec![0, 1]], vec![vec![0, 1]], |_, _| false, "").is_err());
        assert!(Partition::new(2, vec![vec![0, 1]], vec![vec![0, 2]], |_, _| false, "").is_err());
        assert!(Partition::new(2, vec![vec![1, 0]], vec![vec![0, 1]], |_, _| false, "").is_err());
    }

    #[test]
    fn two_domain_overlap_size() {
        for n in 3..=20 {
            for lines in 0..=1 {
                let g = GridSpec::new(n);
                let p = two_domain_partition(g, lines).unwrap();
                let common = p.sets[0].iter().filter(|k| p.sets[1].binary_search(k).is_ok()).count();
                assert_eq!(common, 2 * lines * n);
                assert_eq!(p.owned[0].len() + p.owned[1].len(), n * n);
                assert_eq!(p.q, 2);
                if lines == 0 {
                    assert_eq!(p.sets, p.owned);
                }
            }
        }
        let p = two_domain_partition(GridSpec::new(4), 1).unwrap();
        assert_eq!((p.len(0), p.len(1)), (12, 12));
        assert!(two_domain_partition(GridSpec::new(4), 3).is_err());
    }

    #[test]
    fn tridiag_blocks() {
        let a = tridiag(6, -1.0, 2.0, -1.0);
        let p = six();
        let b = subdomain_blocks(&a, &p, 0).unwrap();
        assert_eq!(b.a_i, tridiag(4, -1.0, 2.0, -1.0));
        assert_eq!(b.exterior, vec![4, 5]);
        assert_eq!(b.k_i, vec![(3, 0, -1.0)]);
        assert_eq!(b.l_i, vec![(0, 3, -1.0)]);
    }

    #[test]
    fn diagonal_matrix_has_no_coupling() {
        let a = SparseMatrix::identity(6).scale(3.0);
        let b = subdomain_blocks(&a, &six(), 1).unwrap();
        assert_eq!(b.a_i, SparseMatrix::identity(4).scale(3.0));
        assert!(b.k_i.is_empty());
    }
}
