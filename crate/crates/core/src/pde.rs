//! Model problems `η u - div(α ∇u) + b·∇u = f` on the unit square.
//!
//! Discretization: 5-point stencil on an `n × n` interior grid with mesh
//! width `h = 1/(n+1)`, lexicographic ordering `k = row·n + col` where the
//! column index runs along `x₁`. Diffusion uses harmonic-mean face
//! coefficients, advection is first-order upwind and homogeneous Dirichlet
//! boundary values are eliminated. The resulting matrices are M-matrices for
//! every mesh width; problems 4-6 are also exactly symmetric.

use std::fmt;
use std::sync::Arc;

use rand::distributions::{Distribution, Open01};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_m_matrix, CheckMode, DenseCap, SparseMatrix};

/// Interior grid with `n` points per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
}

impl GridSpec {
    pub fn new(n: usize) -> Self {
        GridSpec { n }
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// Number of unknowns `N = n²`.
    pub fn size(&self) -> usize {
        self.n * self.n
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.n + col
    }

    /// Coordinates `(x₁, x₂)` of the unknown with the given grid indices.
    pub fn point(&self, row: usize, col: usize) -> (f64, f64) {
        let h = self.h();
        ((col + 1) as f64 * h, (row + 1) as f64 * h)
    }
}

type Scalar2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
type Vector2 = Arc<dyn Fn(f64, f64) -> (f64, f64) + Send + Sync>;

/// Coefficients of one model problem.
#[derive(Clone)]
pub struct ProblemSpec {
    pub id: u8,
    pub eta: Scalar2,
    pub alpha: Scalar2,
    pub b: Vector2,
    pub beta: Option<f64>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec").field("id", &self.id).field("beta", &self.beta).finish_non_exhaustive()
    }
}

const BETA: f64 = 100.0;

fn jump_alpha(x1: f64, x2: f64) -> f64 {
    if ((x1 - 0.5).powi(2) + (x2 - 0.1).powi(2)).sqrt() < 0.25 {
        1e6
    } else {
        1.0
    }
}

fn vortex(beta: f64) -> Vector2 {
    Arc::new(move |x1, x2| (beta * (x1 * (x1 - 1.0) * (1.0 - 2.0 * x2)), -beta * (x2 * (x2 - 1.0) * (1.0 - 2.0 * x1))))
}

impl ProblemSpec {
    /// One of the six model problems.
    pub fn model(id: u8) -> Result<Self> {
        let zero: Scalar2 = Arc::new(|_, _| 0.0);
        let no_flow: Vector2 = Arc::new(|_, _| (0.0, 0.0));
        let eta1: Scalar2 = Arc::new(|x1, x2| x1 * x1 * (x1 + x2).cos().powi(2));
        let spec = match id {
            1 => ProblemSpec {
                id,
                eta: eta1,
                alpha: Arc::new(|x1, x2| 20.0 * (x1 + x2).powi(2) * (x1 - x2).exp()),
                b: Arc::new(|x1, x2| (x2 - 0.5, x1 - 0.5)),
                beta: None,
            },
            2 => ProblemSpec { id, eta: zero, alpha: Arc::new(|_, _| 1.0), b: vortex(BETA), beta: Some(BETA) },
            3 => ProblemSpec { id, eta: zero, alpha: Arc::new(jump_alpha), b: vortex(BETA), beta: Some(BETA) },
            4 => ProblemSpec {
                id,
                eta: eta1,
                alpha: Arc::new(|x1, x2| (x1 + x2).powi(2) * (x1 - x2).exp()),
                b: no_flow,
                beta: None,
            },
            5 => ProblemSpec {
                id,
                eta: Arc::new(|x1, x2| 500.0 * x1 + x2),
                alpha: Arc::new(|x1, x2| 1.0 + 9.0 * (x1 + x2)),
                b: no_flow,
                beta: None,
            },
            6 => ProblemSpec { id, eta: zero, alpha: Arc::new(jump_alpha), b: no_flow, beta: None },
            _ => return Err(Error::InvalidArgument(format!("problem id must be 1..=6, got {id}"))),
        };
        Ok(spec)
    }

    /// Constant-coefficient Poisson problem `-Δu = f`.
    pub fn poisson() -> Self {
        ProblemSpec {
            id: 0,
            eta: Arc::new(|_, _| 0.0),
            alpha: Arc::new(|_, _| 1.0),
            b: Arc::new(|_, _| (0.0, 0.0)),
            beta: None,
        }
    }

    /// Problems 4-6 (and the Poisson problem) have no advection.
    pub fn is_symmetric(&self) -> bool {
        matches!(self.id, 0 | 4 | 5 | 6)
    }
}

/// Metadata describing a generated problem, for JSON output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemInfo {
    pub problem: u8,
    pub n: usize,
    pub size: usize,
    pub h: f64,
    pub nnz: usize,
    pub symmetric: bool,
    pub scheme: String,
}

impl ProblemInfo {
    pub fn new(spec: &ProblemSpec, grid: GridSpec, a: &SparseMatrix) -> Self {
        ProblemInfo {
            problem: spec.id,
            n: grid.n,
            size: grid.size(),
            h: grid.h(),
            nnz: a.nnz(),
            symmetric: a.is_symmetric(),
            scheme: "5-point, harmonic-mean diffusion, first-order upwind advection, g = 0".into(),
        }
    }
}

/// Harmonic mean, written so that swapping the arguments is bitwise exact.
fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * (a * b) / (a + b)
}

/// Assembles the discrete operator. Fails if the result is not an M-matrix
/// by the sufficient (chained dominance) criterion.
pub fn discretize(spec: &ProblemSpec, grid: GridSpec) -> Result<SparseMatrix> {
    let n = grid.n;
    if n < 3 {
        return Err(Error::InvalidArgument(format!("grid needs n >= 3, got {n}")));
    }
    let h = grid.h();
    let h2 = h * h;
    let mut t = Vec::with_capacity(5 * n * n);
    for row in 0..n {
        for col in 0..n {
            let k = grid.index(row, col);
            // Coordinates from integer offsets so neighbouring rows evaluate
            // the coefficient at bitwise identical points.
            let c = |k: usize| k as f64 * h;
            let (x1, x2) = (c(col + 1), c(row + 1));
            let ap = (spec.alpha)(x1, x2);
            let west = harmonic(ap, (spec.alpha)(c(col), x2)) / h2;
            let east = harmonic(ap, (spec.alpha)(c(col + 2), x2)) / h2;
            let south = harmonic(ap, (spec.alpha)(x1, c(row))) / h2;
            let north = harmonic(ap, (spec.alpha)(x1, c(row + 2))) / h2;
            let (b1, b2) = (spec.b)(x1, x2);
            // Upwind: the flow direction picks the one-sided difference.
            let (adv_w, adv_e) = if b1 > 0.0 { (b1 / h, 0.0) } else { (0.0, -b1 / h) };
            let (adv_s, adv_n) = if b2 > 0.0 { (b2 / h, 0.0) } else { (0.0, -b2 / h) };
            let diag = west + east + south + north + adv_w + adv_e + adv_s + adv_n + (spec.eta)(x1, x2);
            t.push((k, k, diag));
            let mut off = |present: bool, j: usize, v: f64| {
                if present && v != 0.0 {
                    t.push((k, j, -v));
                }
            };
            off(col > 0, k.wrapping_sub(1), west + adv_w);
            off(col + 1 < n, k + 1, east + adv_e);
            off(row > 0, k.wrapping_sub(n), south + adv_s);
            off(row + 1 < n, k + n, north + adv_n);
        }
    }
    let a = SparseMatrix::from_triplets(grid.size(), t)?;
    let report = is_m_matrix(&a, CheckMode::Sufficient, DenseCap::default())?;
    if !report.is_m_matrix {
        return Err(Error::NotMMatrix(format!("problem {} at n = {n}", spec.id)));
    }
    Ok(a)
}

/// Right-hand side and initial guess with entries uniform in `(0, 1)`.
pub fn make_rhs_and_init(size: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = (0..size).map(|_| Open01.sample(&mut rng)).collect();
    let u0 = (0..size).map(|_| Open01.sample(&mut rng)).collect();
    (f, u0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poisson_is_textbook_stencil() {
        let g = GridSpec::new(4);
        let a = discretize(&ProblemSpec::poisson(), g).unwrap();
        let s = 1.0 / (g.h() * g.h());
        assert_eq!(a.get(5, 5), 4.0 * s);
        for j in [4, 6, 1, 9] {
            assert_eq!(a.get(5, j), -s);
        }
        // Row ends do not couple across the grid boundary.
        assert_eq!(a.get(3, 4), 0.0);
        assert!(a.is_symmetric());
    }

    #[test]
    fn all_problems_are_m_matrices() {
        for id in 1..=6 {
            let spec = ProblemSpec::model(id).unwrap();
            for n in [3, 7, 20] {
                let a = discretize(&spec, GridSpec::new(n)).unwrap();
                assert_eq!(a.is_symmetric(), spec.is_symmetric(), "problem {id}");
            }
        }
    }

    #[test]
    fn rejects_bad_ids_and_sizes() {
        assert!(ProblemSpec::model(7).is_err());
        assert!(discretize(&ProblemSpec::poisson(), GridSpec::new(2)).is_err());
    }

    #[test]
    fn rhs_is_deterministic_and_open() {
        let (f, u) = make_rhs_and_init(1000, 42);
        assert_eq!(make_rhs_and_init(1000, 42).0, f);
        assert!(f.iter().chain(&u).all(|&v| v > 0.0 && v < 1.0));
        assert_ne!(make_rhs_and_init(1000, 43).0, f);
    }
}
