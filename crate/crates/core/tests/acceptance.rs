//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Grid sizes: `n = 20` gives `N = 400`, `n = 50` gives `N = 2500`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use mpschwarz::conditions::{check_operator, check_spd_conditions};
use mpschwarz::decomp::{two_domain_partition, Partition};
use mpschwarz::fpsim::{FloatFormat, BINARY_PRESETS};
use mpschwarz::gmres::{gmres_solve, GmresConfig};
use mpschwarz::linalg::{lu_factor, spectral_radius_dense, DenseCap, SparseMatrix};
use mpschwarz::pde::{discretize, make_rhs_and_init, GridSpec, ProblemSpec};
use mpschwarz::perturb::{perturb_report, PERTURB_CAP};
use mpschwarz::rounding::{round_mmatrix, RoundingKind};
use mpschwarz::scaling::scale_general;
use mpschwarz::schwarz::{build_operator, SchwarzConfig, SchwarzOperator, SolveMode, Variant};

const CAP: DenseCap = DenseCap(3000);
const METHODS3: [Variant; 3] = [Variant::DAS, Variant::RAS, Variant::MS];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn all_formats() -> Vec<String> {
    let mut v: Vec<String> = BINARY_PRESETS.iter().map(|s| s.to_string()).collect();
    v.extend((1..=16).map(|d| format!("dec:{d}")));
    v
}

fn fmt(name: &str) -> FloatFormat {
    FloatFormat::preset(name).unwrap()
}

fn problem(id: u8, n: usize) -> (SparseMatrix, Partition) {
    let g = GridSpec::new(n);
    (discretize(&ProblemSpec::model(id).unwrap(), g).unwrap(), two_domain_partition(g, 1).unwrap())
}

fn rounding_for(id: u8) -> RoundingKind {
    if id <= 3 {
        RoundingKind::MmatrixUp
    } else {
        RoundingKind::DiagExact
    }
}

fn operator(a: &SparseMatrix, part: &Partition, id: u8, v: Variant, f: &str) -> mpschwarz::Result<SchwarzOperator> {
    build_operator(a, part, &SchwarzConfig::new(v, fmt(f)).with_rounding(rounding_for(id)))
}

fn rho(op: &SchwarzOperator) -> f64 {
    spectral_radius_dense(&op.assemble_dense_iteration_matrix(CAP).unwrap(), CAP).unwrap()
}

/// Random matrices with an M-matrix sign pattern and entries spread over
/// six decades, scaled into each format's range as the solver would.
fn criterion_1() -> Outcome {
    let formats = all_formats();
    let bad: usize = (0..200u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(3..25);
            let mut t = vec![];
            for i in 0..n {
                let mut off = 0.0;
                for j in 0..n {
                    if i != j && rng.gen_bool(0.3) {
                        let v = 10f64.powf(rng.gen_range(-3.0..3.0));
                        off += v;
                        t.push((i, j, -v));
                    }
                }
                t.push((i, i, off + 10f64.powf(rng.gen_range(-3.0..3.0))));
            }
            let a = SparseMatrix::from_triplets(n, t).unwrap();
            let mut bad = 0;
            for f in &formats {
                let fm = fmt(f);
                let (_, s) = scale_general(&a, &fm, 0.1).unwrap();
                // Decimal formats have no range limit, so the raw matrix is rounded too.
                let inputs = if f.starts_with("dec:") { vec![&a, &s] } else { vec![&s] };
                for x in inputs {
                    let r = round_mmatrix(x, &fm).unwrap();
                    if !r.saturated.is_empty() || r.f.values().iter().any(|&v| v < 0.0) {
                        bad += 1;
                    }
                }
            }
            bad
        })
        .sum();
    outcome(bad == 0, format!("{bad} of {} rounded matrices with a negative entry in F", 200 * (formats.len() + 16)))
}

struct Rho {
    id: u8,
    method: Variant,
    format: String,
    certified: bool,
    rho: f64,
}

fn rho_table() -> Vec<Rho> {
    let mut jobs = vec![];
    for id in 1..=3u8 {
        for m in Variant::ALL {
            for f in all_formats() {
                jobs.push((id, m, f));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(id, method, format)| {
            let (a, part) = problem(id, 20);
            let op = operator(&a, &part, id, method, &format).unwrap();
            let certified = check_operator(&op, CAP).unwrap().certified();
            Rho { id, method, rho: rho(&op), format, certified }
        })
        .collect()
}

/// The convergence theorem covers MS, RAS and damped AS with θ < 1/q.
/// Undamped AS is reported alongside but is not expected to contract.
fn criterion_2(table: &[Rho]) -> Outcome {
    let covered = |r: &&Rho| r.method != Variant::AS;
    let certified: Vec<&Rho> = table.iter().filter(|r| r.certified).filter(covered).collect();
    let bad: Vec<String> = certified
        .iter()
        .filter(|r| r.rho >= 1.0)
        .map(|r| format!("P{} {} {} rho={:.4}", r.id, r.method, r.format, r.rho))
        .collect();
    let as_certified: Vec<&Rho> = table.iter().filter(|r| r.certified && r.method == Variant::AS).collect();
    let as_max = as_certified.iter().map(|r| r.rho).fold(0.0, f64::max);
    outcome(
        bad.is_empty(),
        format!(
            "{} certified MS/RAS/dAS cases, violations: {:?}; undamped AS: {} certified, max rho {:.6}",
            certified.len(),
            bad,
            as_certified.len(),
            as_max
        ),
    )
}

fn criterion_3(table: &[Rho]) -> Outcome {
    let mut bad = vec![];
    let mut pairs = 0;
    for r in table.iter().filter(|r| r.certified) {
        let Some(d) = r.format.strip_prefix("dec:").map(|d| d.parse::<u32>().unwrap()) else { continue };
        if !(3..16).contains(&d) {
            continue;
        }
        let next = format!("dec:{}", d + 1);
        if let Some(s) = table.iter().find(|s| s.id == r.id && s.method == r.method && s.format == next && s.certified) {
            pairs += 1;
            if s.rho > r.rho + 1e-8 {
                bad.push(format!("P{} {} dec:{d}->{}: {:.6}->{:.6}", r.id, r.method, d + 1, r.rho, s.rho));
            }
        }
    }
    outcome(bad.is_empty(), format!("{pairs} adjacent certified pairs, violations: {bad:?}"))
}

fn criterion_4() -> Outcome {
    let (a, part) = problem(1, 50);
    let passed: Vec<bool> = BINARY_PRESETS
        .par_iter()
        .map(|f| check_operator(&operator(&a, &part, 1, Variant::MS, f).unwrap(), CAP).unwrap().certified())
        .collect();
    // First format from which every finer format is certified.
    let threshold = (0..passed.len()).find(|&k| passed[k..].iter().all(|&p| p));
    let expected = 3; // fp16
    let ok = threshold.is_some_and(|t| t.abs_diff(expected) <= 1);
    let names: Vec<String> = BINARY_PRESETS.iter().zip(&passed).map(|(f, p)| format!("{f}:{}", if *p { "pass" } else { "fail" })).collect();
    outcome(ok, format!("{} (threshold {:?})", names.join(" "), threshold.map(|t| BINARY_PRESETS[t])))
}

fn trace_rho(id: u8, m: Variant, f: &str, a: &SparseMatrix, part: &Partition, rhs: &[f64], u0: &[f64], x: &[f64]) -> f64 {
    let op = operator(a, part, id, m, f).unwrap();
    op.iterate(u0, rhs, Some(x)).unwrap().rho_conv.unwrap_or(f64::NAN)
}

fn criterion_5() -> Outcome {
    let mut jobs = vec![];
    for id in 1..=6u8 {
        for m in METHODS3 {
            jobs.push((id, m));
        }
    }
    let rows: Vec<(u8, Variant, f64, f64)> = jobs
        .into_par_iter()
        .map(|(id, m)| {
            let (a, part) = problem(id, 50);
            let (f, u0) = make_rhs_and_init(a.n(), 7);
            let x = lu_factor(&a).unwrap().solve(&f).unwrap();
            let r5 = trace_rho(id, m, "dec:5", &a, &part, &f, &u0, &x);
            let r16 = trace_rho(id, m, "dec:16", &a, &part, &f, &u0, &x);
            (id, m, r5, r16)
        })
        .collect();
    let worst = rows.iter().map(|r| (r.2 - r.3).abs()).fold(0.0, f64::max);
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !((r.2 - r.3).abs() <= 0.02))
        .map(|r| format!("P{} {}: {:.4} vs {:.4}", r.0, r.1, r.2, r.3))
        .collect();
    outcome(bad.is_empty(), format!("max |diff| = {worst:.2e} over {} cases, violations: {bad:?}", rows.len()))
}

fn criterion_6() -> Outcome {
    let mut jobs = vec![];
    for id in 1..=3u8 {
        for m in METHODS3 {
            jobs.push((id, m));
        }
    }
    let rows: Vec<(u8, Variant, usize, usize)> = jobs
        .into_par_iter()
        .map(|(id, m)| {
            let (a, part) = problem(id, 50);
            let (f, _) = make_rhs_and_init(a.n(), 11);
            let cfg = GmresConfig::default();
            let its = |fm: &str| gmres_solve(&a, &operator(&a, &part, id, m, fm).unwrap(), &f, &cfg).unwrap().iters;
            (id, m, its("dec:5"), its("dec:16"))
        })
        .collect();
    let bad: Vec<String> =
        rows.iter().filter(|r| r.2.abs_diff(r.3) > 2).map(|r| format!("P{} {}: {} vs {}", r.0, r.1, r.2, r.3)).collect();
    let counts: Vec<String> = rows.iter().map(|r| format!("P{}/{}:{}/{}", r.0, r.1, r.2, r.3)).collect();
    outcome(bad.is_empty(), format!("iterations dec:5/dec:16 {}; violations: {bad:?}", counts.join(" ")))
}

fn criterion_7() -> Outcome {
    let mut jobs = vec![];
    for id in 4..=6u8 {
        for n in [20, 50] {
            for f in all_formats() {
                jobs.push((id, n, f));
            }
        }
    }
    let rows: Vec<(String, usize, usize)> = jobs
        .into_par_iter()
        .map(|(id, n, f)| {
            let (a, part) = problem(id, n);
            let op = operator(&a, &part, id, Variant::MS, &f).unwrap();
            let mut fails = 0;
            for s in &op.subdomains {
                if !check_spd_conditions(&s.rounded, CAP).unwrap().weyl_holds {
                    fails += 1;
                }
            }
            (format!("P{id} n={n} {f}"), op.subdomains.len(), fails)
        })
        .collect();
    let total: usize = rows.iter().map(|r| r.1).sum();
    let bad: Vec<&String> = rows.iter().filter(|r| r.2 > 0).map(|r| &r.0).collect();
    outcome(bad.is_empty(), format!("{total} symmetric subdomain instances, violations: {bad:?}"))
}

fn criterion_8() -> Outcome {
    let mut jobs = vec![];
    for id in 1..=3u8 {
        for f in all_formats() {
            jobs.push((id, f));
        }
    }
    let rows: Vec<(String, Option<bool>, Option<f64>, f64)> = jobs
        .into_par_iter()
        .map(|(id, f)| {
            let (a, part) = problem(id, 20);
            let full = build_operator(&a, &part, &SchwarzConfig::exact(Variant::DAS)).unwrap();
            let mp = operator(&a, &part, id, Variant::DAS, &f).unwrap();
            let r = perturb_report(&full, &mp, PERTURB_CAP).unwrap();
            (format!("P{id} {f}"), r.bound_holds, r.formula_residual, r.epsilon)
        })
        .collect();
    let evaluated: Vec<_> = rows.iter().filter(|r| r.1.is_some()).collect();
    let bad: Vec<String> = evaluated
        .iter()
        .filter(|r| r.1 != Some(true) || !r.2.is_some_and(|d| d <= 1e-10))
        .map(|r| format!("{} holds={:?} formula diff={:?}", r.0, r.1, r.2))
        .collect();
    outcome(bad.is_empty(), format!("{} of {} cases with eps < 1/2, violations: {bad:?}", evaluated.len(), rows.len()))
}

/// `α` whose nearest fp16 value is rounded up.
fn round_up_alpha() -> f64 {
    let f = fmt("fp16");
    let mut alpha = 1.0 / 3.0;
    while f.chop(alpha) <= alpha {
        alpha *= 1.1;
    }
    alpha
}

fn criterion_9() -> Outcome {
    let g = GridSpec::new(12);
    let h2 = g.h() * g.h();
    // Integer 5-point stencil times a non-representable α.
    let alpha = round_up_alpha();
    let a = discretize(&ProblemSpec::poisson(), g).unwrap().scale(h2 * alpha);
    let part = two_domain_partition(g, 1).unwrap();
    let cfg = SchwarzConfig::new(Variant::DAS, fmt("fp16")).with_rounding(RoundingKind::PlainNearest).with_scaling(false);
    let mp = build_operator(&a, &part, &cfg).unwrap();
    let full = build_operator(&a, &part, &SchwarzConfig::exact(Variant::DAS)).unwrap();
    let tau = (fmt("fp16").chop(alpha) - alpha) / alpha;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let u: Vec<f64> = (0..a.n()).map(|_| rng.gen::<f64>()).collect();
        let f: Vec<f64> = (0..a.n()).map(|_| rng.gen::<f64>()).collect();
        let got = mp.sweep(&u, &f).unwrap();
        let exact = full.sweep(&u, &f).unwrap();
        let damped: Vec<f64> = u.iter().zip(&exact).map(|(x, y)| x + (y - x) / (1.0 + tau)).collect();
        let num = got.iter().zip(&damped).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den = damped.iter().map(|x| x * x).sum::<f64>().sqrt();
        worst = worst.max(num / den);
    }
    outcome(tau > 0.0 && worst <= 1e-12, format!("tau = {tau:.3e}, max relative deviation {worst:.2e}"))
}

fn criterion_10() -> Outcome {
    let mut jobs = vec![];
    for id in 1..=6u8 {
        for m in Variant::ALL {
            jobs.push((id, m));
        }
    }
    let rows: Vec<(u8, Variant, f64)> = jobs
        .into_par_iter()
        .map(|(id, m)| {
            let (a, part) = problem(id, 20);
            let on = SchwarzConfig::new(m, FloatFormat::fp64()).with_rounding(rounding_for(id));
            let off = on.clone().with_scaling(false);
            let r_on = rho(&build_operator(&a, &part, &on).unwrap());
            let r_off = rho(&build_operator(&a, &part, &off).unwrap());
            (id, m, (r_on - r_off).abs())
        })
        .collect();
    let worst = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let bad: Vec<String> = rows.iter().filter(|r| r.2 > 1e-10).map(|r| format!("P{} {}: {:.2e}", r.0, r.1, r.2)).collect();
    outcome(bad.is_empty(), format!("max |rho_on - rho_off| = {worst:.2e}, violations: {bad:?}"))
}

fn criterion_11() -> Outcome {
    let formats = all_formats();
    let rows: Vec<(String, f64)> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let id = rng.gen_range(1..=6u8);
            let n = rng.gen_range(5..=15);
            let m = Variant::ALL[rng.gen_range(0..4)];
            let f = &formats[rng.gen_range(0..formats.len())];
            let mode = if rng.gen_bool(0.5) { SolveMode::RoundedMatrixExactSolve } else { SolveMode::FullySimulatedSolve };
            let (a, part) = problem(id, n);
            let cfg = SchwarzConfig::new(m, fmt(f)).with_rounding(rounding_for(id)).with_solve_mode(mode);
            let op = build_operator(&a, &part, &cfg).unwrap();
            let (rhs, _) = make_rhs_and_init(a.n(), seed);
            let x = lu_factor(&a).unwrap().solve(&rhs).unwrap();
            let y = op.sweep(&x, &rhs).unwrap();
            let num = x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let den = x.iter().map(|p| p * p).sum::<f64>().sqrt();
            (format!("P{id} n={n} {m} {f} {mode:?}"), num / den)
        })
        .collect();
    let worst = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let bad: Vec<String> = rows.iter().filter(|r| !(r.1 <= 1e-12)).map(|r| format!("{}: {:.2e}", r.0, r.1)).collect();
    outcome(bad.is_empty(), format!("100 trials, max relative change {worst:.2e}, violations: {bad:?}"))
}

fn main() {
    // Only plain invocations run the suite; listing or filtering for other
    // targets is a no-op.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    // Numeric arguments pick a subset, e.g. `-- 7 8`.
    let picked: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let want = |k: usize| picked.is_empty() || picked.contains(&k);
    let mut failed = 0;
    let mut report = |k: usize, name: &str, start: Instant, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        println!("criterion {k:>2} [{tag}] {name} ({:.1}s): {}", start.elapsed().as_secs_f64(), o.detail);
    };
    if want(1) {
        let t = Instant::now();
        report(1, "rounding positivity", t, criterion_1());
    }
    if want(2) || want(3) {
        let t = Instant::now();
        let table = rho_table();
        if want(2) {
            report(2, "certified cases converge", t, criterion_2(&table));
        }
        if want(3) {
            report(3, "monotone in precision", t, criterion_3(&table));
        }
    }
    if want(4) {
        let t = Instant::now();
        report(4, "condition threshold for problem 1", t, criterion_4());
    }
    if want(5) {
        let t = Instant::now();
        report(5, "five digits suffice", t, criterion_5());
    }
    if want(6) {
        let t = Instant::now();
        report(6, "GMRES iteration robustness", t, criterion_6());
    }
    if want(7) {
        let t = Instant::now();
        report(7, "Weyl inequality", t, criterion_7());
    }
    if want(8) {
        let t = Instant::now();
        report(8, "additive perturbation bound", t, criterion_8());
    }
    if want(9) {
        let t = Instant::now();
        report(9, "scalar rounding damping identity", t, criterion_9());
    }
    if want(10) {
        let t = Instant::now();
        report(10, "scaling similarity", t, criterion_10());
    }
    if want(11) {
        let t = Instant::now();
        report(11, "fixed point", t, criterion_11());
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
