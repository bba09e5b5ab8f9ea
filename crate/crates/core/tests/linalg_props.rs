use mpschwarz::linalg::{
    is_m_matrix, lu_factor, read_matrix_market, spectral_radius_dense, write_matrix_market, CheckMode, DenseCap,
    SparseMatrix,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_sparse(rng: &mut ChaCha8Rng, n: usize, dominant: bool) -> SparseMatrix {
    let mut t = vec![];
    for i in 0..n {
        let mut off = 0.0;
        for j in 0..n {
            if i != j && rng.gen_bool(0.2) {
                let v: f64 = rng.gen_range(-1.0..1.0);
                let v = if dominant { -v.abs() } else { v };
                off += v.abs();
                t.push((i, j, v));
            }
        }
        t.push((i, i, off + rng.gen_range(0.5..2.0)));
    }
    SparseMatrix::from_triplets(n, t).unwrap()
}

#[test]
fn solve_residual_is_small() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let n = rng.gen_range(5..60);
        let a = random_sparse(&mut rng, n, false);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = lu_factor(&a).unwrap().solve(&b).unwrap();
        let d = a.to_dense();
        let kappa1 = d.abs().row_sum().max() * d.clone().try_inverse().unwrap().abs().row_sum().max();
        let r = DVector::from_vec(b.clone()) - &d * DVector::from_vec(x);
        assert!(r.amax() / DVector::from_vec(b).amax() <= 1e-12 * kappa1);
    }
}

#[test]
fn exact_agrees_with_sufficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..30 {
        let n = rng.gen_range(3..30);
        let a = random_sparse(&mut rng, n, true);
        let s = is_m_matrix(&a, CheckMode::Sufficient, DenseCap::default()).unwrap();
        let e = is_m_matrix(&a, CheckMode::Exact, DenseCap::default()).unwrap();
        if s.is_m_matrix {
            assert!(e.is_m_matrix);
        }
    }
}

#[test]
fn spectral_radius_predicts_decay() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.gen_range(5..40);
        let scale = rng.gen_range(0.5..1.5);
        let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)) * (scale / (n as f64).sqrt());
        let rho = spectral_radius_dense(&m, DenseCap::default()).unwrap();
        if (rho - 1.0).abs() < 0.05 {
            continue;
        }
        let mut v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        for _ in 0..2000 {
            v = &m * v;
            let nv = v.norm();
            if nv > 1e100 || nv < 1e-100 {
                break;
            }
        }
        assert_eq!(v.norm() < 1.0, rho < 1.0, "rho = {rho}");
    }
}

#[test]
fn matrix_market_round_trip_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = random_sparse(&mut rng, 25, false);
    let mut buf = Vec::new();
    write_matrix_market(&a, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("%%MatrixMarket matrix coordinate real general"));
    let b = read_matrix_market(std::io::BufReader::new(buf.as_slice())).unwrap();
    assert_eq!(a, b);
}
