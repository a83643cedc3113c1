//! One PASS/FAIL line per acceptance criterion. Set `ACCEPTANCE_STRICT=1` to
//! turn any FAIL into a non-zero exit.

mod common;

use std::f64::consts::PI;

use rand::Rng;
use schrodinger_measures::measures::{metric_d, ClassBound, MetricConfig, SignedMeasure};
use schrodinger_measures::oracle::{blend, blend_bound, build_oracle, calibrate, predict, BlendWeights, OracleError};
use schrodinger_measures::potentials;
use schrodinger_measures::reflectionless::{reflectionless_defect, BorelWindow};
use schrodinger_measures::schrodinger::{transfer_matrix, Mat2, SolverConfig, C64};
use schrodinger_measures::weyl::*;
use schrodinger_measures::dynamics::shift_trace;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn mat_gap(a: &Mat2, b: &Mat2) -> f64 {
    [a.a - b.a, a.b - b.b, a.c - b.c, a.d - b.d].iter().map(|e| e.norm()).fold(0.0, f64::max)
}

fn free_matrix(z: C64, d: f64) -> Mat2 {
    let k = common::sqrt_upper(z);
    let kd = k * d;
    Mat2::new(kd.cos(), kd.sin() / k, -k * kd.sin(), kd.cos())
}

fn nonnegative_density(seed: u64) -> SignedMeasure {
    let raw = common::random_measure(&mut common::rng(seed), -3.0, 3.0, 2.0, 0, 0.0);
    let values = raw.density().values.iter().map(|v| v.abs()).collect();
    SignedMeasure::new(vec![], raw.density().breaks.clone(), values).unwrap()
}

fn free_m_function() -> Outcome {
    let cfg = WeylConfig::default();
    let mu = SignedMeasure::zero();
    let mut worst: f64 = 0.0;
    for z in [c(-4.0, 0.0), c(-1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0), c(2.0, 0.5)] {
        let m = if z.im > 0.0 {
            m_halfline(&mu, 0.0, z, Side::Plus, &cfg).unwrap().value
        } else {
            m_exact(&mu, 0.0, z, Side::Plus, &cfg.solver).unwrap()
        };
        worst = worst.max((m - C64::i() * common::sqrt_upper(z)).norm());
    }
    outcome(worst < 1e-6, format!("max |m+ - i sqrt z| = {worst:.2e} (< 1e-6)"))
}

fn unit_determinant() -> Outcome {
    let cfg = SolverConfig::default();
    let mut r = common::rng(1001);
    let (mut det, mut comp): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let mu = common::random_measure(&mut r, -1.0, 1.0, 2.0, 3, 1.0);
        let z = c(r.gen_range(-4.0..4.0), r.gen_range(-1.0..1.0));
        let (x0, x2) = (r.gen_range(-1.2..-0.5), r.gen_range(0.5..1.2));
        let x1 = r.gen_range(x0..x2);
        let a = transfer_matrix(&mu, z, x0, x1, &cfg).unwrap().matrix;
        let b = transfer_matrix(&mu, z, x1, x2, &cfg).unwrap().matrix;
        let whole = transfer_matrix(&mu, z, x0, x2, &cfg).unwrap().matrix;
        det = det.max((whole.det() - 1.0).norm());
        comp = comp.max(mat_gap(&b.mul(&a), &whole));
    }
    outcome(
        det < 1e-10 && comp < 1e-8,
        format!("max |det - 1| = {det:.2e} (< 1e-10), composition gap = {comp:.2e} (< 1e-8)"),
    )
}

fn delta_potential() -> Outcome {
    let cfg = SolverConfig::default();
    let z = c(1.3, 0.4);
    let mut worst: f64 = 0.0;
    for alpha in [-2.0, 0.5, 3.0] {
        let t = transfer_matrix(&SignedMeasure::dirac(0.4, alpha), z, -0.5, 1.0, &cfg).unwrap().matrix;
        let hand = free_matrix(z, 0.6).mul(&Mat2::atom_jump(alpha)).mul(&free_matrix(z, 0.9));
        worst = worst.max(mat_gap(&t, &hand));
    }
    outcome(worst < 1e-8, format!("max gap to free-jump-free = {worst:.2e} (< 1e-8)"))
}

fn soliton_reflectionless() -> Outcome {
    let cfg = WeylConfig::default();
    let w = BorelWindow::interval(0.1, 5.0, 20).unwrap();
    let sol = reflectionless_defect(&potentials::standard_soliton(), 0.0, &w, &DEFAULT_Y_SCHEDULE, &cfg).unwrap();
    let jost = sol
        .points
        .iter()
        .map(|p| {
            let want = common::soliton_m(c(p.t, 1e-14));
            (p.m_plus - want).norm().max((p.m_minus - want).norm())
        })
        .fold(0.0, f64::max);
    let near = BorelWindow::interval(0.85, 1.15, 5).unwrap();
    let bar = reflectionless_defect(&potentials::barrier(0.0, 1.0, 1.0).unwrap(), 0.0, &near, &DEFAULT_Y_SCHEDULE, &cfg)
        .unwrap();
    let bar_min = bar.points.iter().map(|p| p.defect).fold(f64::INFINITY, f64::min);
    outcome(
        sol.max_defect < 1e-2 && sol.nonconverged == 0 && jost < 1e-4 && bar_min > 0.1,
        format!(
            "soliton max defect = {:.2e} (< 1e-2), Jost gap = {jost:.2e} (< 1e-4), barrier min defect near 1 = {bar_min:.3} (> 0.1)",
            sol.max_defect
        ),
    )
}

fn g_decomposition() -> Outcome {
    let cfg = WeylConfig::default();
    let w = BorelWindow::interval(0.1, 5.0, 20).unwrap();
    let mut sum_gap: f64 = 0.0;
    let mut half_gap: f64 = 0.0;
    for (i, mu) in [potentials::standard_soliton(), potentials::barrier(0.0, 1.0, 1.0).unwrap()].iter().enumerate() {
        let r = reflectionless_defect(mu, 0.0, &w, &DEFAULT_Y_SCHEDULE, &cfg).unwrap();
        for p in &r.points {
            if let Some((gp, gm)) = p.g_pair() {
                sum_gap = sum_gap.max((gp + gm - 1.0).abs());
                if i == 0 {
                    half_gap = half_gap.max((gp - 0.5).abs()).max((gm - 0.5).abs());
                }
            }
        }
    }
    outcome(
        sum_gap < 1e-10 && half_gap < 1e-2,
        format!("max |g+ + g- - 1| = {sum_gap:.2e} (< 1e-10), soliton max |g - 1/2| = {half_gap:.2e} (< 1e-2)"),
    )
}

fn green_identity() -> Outcome {
    let cfg = SolverConfig::default();
    let cases = [
        ("free", SignedMeasure::zero()),
        ("soliton", potentials::standard_soliton()),
        ("random", nonnegative_density(77)),
    ];
    let mut route: f64 = 0.0;
    let mut bad = Vec::new();
    for (name, mu) in &cases {
        for t in [0.5, 1.0, 4.0] {
            match green_diagonal(mu, 0.0, c(-t, 0.0), &cfg) {
                Ok(g) => {
                    route = route.max(g.route_gap() / (1.0 + g.value.norm()));
                    if !(g.value.re > 0.0) {
                        bad.push(format!("{name} G(-{t}) = {:.4}", g.value.re));
                    }
                }
                Err(e) => bad.push(format!("{name} G(-{t}): {e}")),
            }
        }
    }
    let detail = if bad.is_empty() { "all positive".to_string() } else { bad.join("; ") };
    outcome(
        route < 1e-8 && bad.is_empty(),
        format!("route gap = {route:.2e} (< 1e-8), positivity: {detail}"),
    )
}

fn blend_suite() -> Outcome {
    let m = MetricConfig::default();
    let mut r = common::rng(4242);
    let mut violations = 0;
    let mut worst_ratio: f64 = 0.0;
    for i in 0..200 {
        let eps = [0.25, 0.1, 0.01][i % 3];
        let mu = common::random_measure(&mut r, -3.0, 3.0, 1.0, 2, 1.0);
        let k = r.gen_range(1..=5);
        let nus: Vec<SignedMeasure> = (0..k)
            .map(|_| {
                let mut scale = eps;
                loop {
                    let noise = common::random_measure(&mut r, -4.0, 4.0, 1.0, 2, 1.0);
                    let nu = mu.shift(r.gen_range(-scale..scale)).add(&noise.scale(scale));
                    if metric_d(&mu, &nu, &m).value < eps {
                        break nu;
                    }
                    scale /= 2.0;
                }
            })
            .collect();
        let raw: Vec<f64> = (0..k).map(|_| r.gen_range(0.05..1.0)).collect();
        let w = BlendWeights::normalized((0..k).collect(), &raw).unwrap();
        let d = metric_d(&mu, &blend(&nus, &w), &m).value;
        worst_ratio = worst_ratio.max(d / blend_bound(eps));
        if d >= blend_bound(eps) {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("200 instances, {violations} violations, worst d / bound = {worst_ratio:.3}"),
    )
}

fn continuity_probe() -> Outcome {
    let cfg = WeylConfig::default();
    let grid = [c(0.0, 1.0), c(1.0, 1.0), c(-1.0, 1.0), c(0.0, 2.0), c(0.5, 2.0)];
    let sides = [Side::Plus, Side::Minus];
    let ns = [2usize, 4, 8, 16, 32, 64];
    let atoms: Vec<SignedMeasure> = ns.iter().map(|&n| SignedMeasure::dirac(1.0 / n as f64, 1.0)).collect();
    let atom_limit = SignedMeasure::dirac(0.0, 1.0);
    let scaled = |s: f64| {
        SignedMeasure::from_density_fn(move |t| -2.0 * s / (t.cosh() * t.cosh()), -25.0, 25.0, 12_500).unwrap()
    };
    let solitons: Vec<SignedMeasure> = ns.iter().map(|&n| scaled(1.0 + 1.0 / n as f64)).collect();
    let sol_limit = scaled(1.0);
    let run = |seq: &[SignedMeasure], limit: &SignedMeasure, x: f64| {
        m_continuity_test(seq, limit, x, &grid, &sides, &cfg).unwrap()
    };
    let a = run(&atoms, &atom_limit, 1.0);
    let s = run(&solitons, &sol_limit, 0.0);
    let last = |r: &ContinuityReport| *r.deviations.last().unwrap();
    // same sequences evaluated farther from where they move
    let a_far = last(&run(&atoms, &atom_limit, 4.0));
    let s_far = last(&run(&solitons, &sol_limit, 3.0));
    outcome(
        a.is_monotone() && s.is_monotone() && last(&a) < 1e-3 && last(&s) < 1e-3,
        format!(
            "n = 64: atoms at x = 1 {:.2e}, scaled soliton at x = 0 {:.2e} (< 1e-3, monotone {}/{}); at x = 4 / x = 3: {a_far:.2e} / {s_far:.2e}",
            last(&a),
            last(&s),
            a.is_monotone(),
            s.is_monotone()
        ),
    )
}

fn denisov_rakhmanov() -> Outcome {
    let mu = potentials::oscillating(50.0, 50_000);
    let xs = [5.0, 10.0, 20.0, 40.0];
    let t = shift_trace(&mu, &xs, &SignedMeasure::zero(), &MetricConfig::default()).unwrap();
    let sup_min = xs.iter().map(|&x| mu.density_sup(x, x + 1.0)).fold(f64::INFINITY, f64::min);
    outcome(
        t.is_decreasing() && t.distances[3] < 1e-2 && sup_min > 0.5,
        format!(
            "d = {} (decreasing, last < 1e-2), min unit-window sup = {sup_min:.3} (> 0.5)",
            t.distances.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn oracle_end_to_end() -> Outcome {
    let eps = 0.05;
    let family: Vec<SignedMeasure> = (0..64)
        .map(|k| potentials::cosine(1.0, 2.0 * PI * k as f64 / 64.0, -40.0, 10.0, 5_000))
        .collect();
    let cal = match calibrate(&family, &[0.0], eps, (0.0, 1.0), ClassBound::new(1.0).unwrap()) {
        Ok(c) => c,
        Err(e) => return outcome(false, format!("calibration failed: {e}")),
    };
    let p = cal.params;
    let model = build_oracle(&family, p).unwrap();
    let long = potentials::builtin("cos").unwrap();
    let fm = p.future_metric();
    let mut worst: f64 = 0.0;
    let mut refused_in_orbit = 0;
    for k in 0..200 {
        let s = long.shift(40.0 + 0.37 * k as f64);
        match predict(&model, &p.past_of(&s)) {
            Ok(pr) => worst = worst.max(fm.distance(&pr.future, &p.future_of(&s)).value),
            Err(_) => refused_in_orbit += 1,
        }
    }
    // refusal must coincide with min distance ≥ 3δ
    let mut probes = vec![SignedMeasure::zero()];
    probes.extend([1.0, -1.0, 3.0].map(|v| SignedMeasure::constant_density(-p.past_len, 0.0, v).unwrap()));
    let mut r = common::rng(10);
    probes.extend((0..20).map(|_| common::random_measure(&mut r, -p.past_len, 0.0, 2.0, 2, 1.0)));
    let (mut refused, mut mismatched) = (0, 0);
    for s in &probes {
        let outside = model.past_distances(s).into_iter().fold(f64::INFINITY, f64::min) >= 3.0 * p.delta;
        let was_refused = matches!(predict(&model, s), Err(OracleError::OutOfCoverage { .. }));
        refused += was_refused as usize;
        mismatched += (outside != was_refused) as usize;
    }
    outcome(
        worst < 3.0 * eps && refused_in_orbit == 0 && refused > 0 && mismatched == 0,
        format!(
            "calibrated L = {}, delta = {} (LOO {:.3}), {} centers, worst held-out d+ = {worst:.3} (< {:.2}); {refused}/{} probes out of coverage, all refused: {}",
            p.past_len,
            p.delta,
            cal.achieved_error,
            model.centers.len(),
            3.0 * eps,
            probes.len(),
            mismatched == 0
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("free m-function", free_m_function),
        ("transfer-matrix unit determinant", unit_determinant),
        ("delta potential", delta_potential),
        ("soliton reflectionless", soliton_reflectionless),
        ("g-decomposition", g_decomposition),
        ("Green identity", green_identity),
        ("blend error bound suite", blend_suite),
        ("m-function continuity probe", continuity_probe),
        ("Denisov-Rakhmanov desk check", denisov_rakhmanov),
        ("oracle end-to-end", oracle_end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let o = f();
        if !o.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {}/{} criteria pass", criteria.len() - failed, criteria.len());
    // report-only by default so the remaining test targets still run
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
