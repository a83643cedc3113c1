mod common;

use std::f64::consts::PI;

use schrodinger_measures::dynamics::*;
use schrodinger_measures::measures::{MetricConfig, SignedMeasure};
use schrodinger_measures::potentials;
use schrodinger_measures::reflectionless::BorelWindow;
use schrodinger_measures::schrodinger::{transfer_matrix, SolverConfig, C64};
use schrodinger_measures::weyl::{WeylConfig, DEFAULT_Y_SCHEDULE};

fn metric() -> MetricConfig {
    MetricConfig::default()
}

#[test]
fn exp_decay_trace_decreases() {
    let mu = potentials::exp_decay(60.0, 6_000);
    let xs: Vec<f64> = (0..=20).map(f64::from).collect();
    let t = shift_trace(&mu, &xs, &SignedMeasure::zero(), &metric()).unwrap();
    assert!(t.is_decreasing());
    assert!(*t.distances.last().unwrap() < 1e-3);
    assert!(t.distances.iter().all(|&d| d >= 0.0));
}

/// `d(S_x V, 0)` with every pairing computed by Simpson on the analytic `V`.
fn oscillating_oracle(x: f64) -> f64 {
    let m = metric();
    m.basis()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let knots = f.knots();
            let rho: f64 = knots
                .windows(2)
                .map(|w| {
                    let g = |t: f64| if x + t > 0.0 { potentials::oscillating_v(x + t) * f.eval(t) } else { 0.0 };
                    common::simpson(&g, w[0].0, w[1].0, 1e-12)
                })
                .sum::<f64>()
                .abs();
            0.5f64.powi(i as i32 + 1) * rho / (1.0 + rho)
        })
        .sum()
}

#[test]
fn oscillating_potential_converges_weakly_not_uniformly() {
    let mu = potentials::oscillating(50.0, 50_000);
    let xs = [5.0, 10.0, 20.0, 40.0];
    let t = shift_trace(&mu, &xs, &SignedMeasure::zero(), &metric()).unwrap();
    assert!(t.is_decreasing(), "{:?}", t.distances);
    assert!(t.distances[3] < 1e-2);
    for (&x, &d) in xs.iter().zip(&t.distances) {
        let oracle = oscillating_oracle(x);
        assert!((d - oracle).abs() < 1e-4 * (1.0 + oracle), "x = {x}: {d} vs {oracle}");
        assert!(mu.density_sup(x, x + 1.0) > 0.5);
    }
}

fn cos_phase(theta: f64, w: f64) -> SignedMeasure {
    SignedMeasure::from_density_fn(move |t| (t + theta).cos(), -w, w, 3_200).unwrap()
}

#[test]
fn omega_of_cosine_is_its_phase_orbit() {
    let w = DEFAULT_WINDOW;
    let tol = 0.05;
    let mu = potentials::builtin("cos").unwrap();
    let xs: Vec<f64> = (0..=260).map(|i| 100.0 + 0.05 * i as f64).collect();
    let om = omega_limit_estimate(&mu, &xs, w, tol, &metric(), 256).unwrap();
    assert!(om.len() > 1);
    let reps = om.embeddings();
    for i in 0..reps.len() {
        for j in 0..i {
            assert!(metric().distance_embedded(&reps[i], &reps[j]) > tol);
        }
    }
    let orbit: Vec<_> = (0..64).map(|k| metric().embed(&cos_phase(2.0 * PI * k as f64 / 64.0, w))).collect();
    let h = hausdorff(reps, &orbit, &metric());
    assert!(h <= tol, "hausdorff {h}");
}

#[test]
fn omega_ignores_left_modification() {
    let w = DEFAULT_WINDOW;
    let tol = 0.05;
    let cos = potentials::builtin("cos").unwrap();
    let bump = potentials::exp_decay(60.0, 6_000);
    let xs: Vec<f64> = (0..=260).map(|i| 100.0 + 0.05 * i as f64).collect();
    let a = omega_limit_estimate(&cos, &xs, w, tol, &metric(), 256).unwrap();
    let b = omega_limit_estimate(&cos.add(&bump), &xs, w, tol, &metric(), 256).unwrap();
    assert!(hausdorff(a.embeddings(), b.embeddings(), &metric()) <= 2.0 * tol);
}

#[test]
fn omega_of_decaying_density_is_zero() {
    let mu = potentials::exp_decay(60.0, 6_000);
    let xs: Vec<f64> = (0..=40).map(|i| 30.0 + 0.5 * i as f64).collect();
    let om = omega_limit_estimate(&mu, &xs, DEFAULT_WINDOW, 0.01, &metric(), 16).unwrap();
    assert_eq!(om.len(), 1);
    let zero = metric().embed(&SignedMeasure::zero());
    assert!(metric().distance_embedded(&om.embeddings()[0], &zero) < 0.01);
}

#[test]
fn cluster_cap_is_reported() {
    let mu = potentials::builtin("cos").unwrap();
    let xs: Vec<f64> = (0..100).map(|i| 50.0 + 0.1 * i as f64).collect();
    let e = omega_limit_estimate(&mu, &xs, DEFAULT_WINDOW, 0.01, &metric(), 3).unwrap_err();
    assert!(matches!(e, DynamicsError::TooManyClusters { cap: 3, .. }));
}

#[test]
fn periodicity_detector() {
    let mu = potentials::builtin("cos").unwrap();
    let x0 = 100.0;
    let xs: Vec<f64> = (1..=5).map(|k| x0 + 2.0 * PI * k as f64).collect();
    let t = shift_trace(&mu, &xs, &mu.shift(x0), &metric()).unwrap();
    assert!(t.distances.iter().all(|&d| d < 1e-6), "{:?}", t.distances);
    // off-period shifts are visible
    let t = shift_trace(&mu, &[x0 + PI], &mu.shift(x0), &metric()).unwrap();
    assert!(t.distances[0] > 0.1);
}

#[test]
fn flow_property() {
    let mu = common::random_measure(&mut common::rng(2), -3.0, 3.0, 1.0, 3, 0.5);
    assert_eq!(mu.shift(0.5).shift(1.25), mu.shift(1.75));
    assert_eq!(mu.shift(-2.0).shift(2.0), mu);
}

#[test]
fn soliton_scan_settles_inside_the_support() {
    let mu = potentials::soliton(10.0, 25.0, 12_500).restrict(0.0, f64::INFINITY);
    let energies = BorelWindow::interval(0.1, 5.0, 10).unwrap();
    let xs = [2.0, 10.0, 20.0, 45.0];
    let scan = omega_reflectionless_scan(&mu, &energies, &xs, DEFAULT_WINDOW, &DEFAULT_Y_SCHEDULE, &WeylConfig::default())
        .unwrap();
    assert!(scan.iter().all(|p| p.max_defect < 1e-3 && p.nonconverged == 0), "{scan:?}");
    let zero = omega_reflectionless_scan(
        &SignedMeasure::zero(),
        &energies,
        &[0.0, 5.0],
        DEFAULT_WINDOW,
        &DEFAULT_Y_SCHEDULE,
        &WeylConfig::default(),
    )
    .unwrap();
    assert!(zero.iter().all(|p| p.max_defect < 1e-8));
}

#[test]
fn windowed_cosine_is_not_reflectionless() {
    // a compactly supported chunk of a periodic potential reflects at every x
    let mu = potentials::builtin("cos").unwrap();
    let band = BorelWindow::interval(0.62, 0.9, 6).unwrap();
    let scan = omega_reflectionless_scan(&mu, &band, &[50.0, 100.0, 150.0, 200.0], DEFAULT_WINDOW, &DEFAULT_Y_SCHEDULE, &WeylConfig::default())
        .unwrap();
    assert!(scan.iter().all(|p| p.mean_defect > 0.1), "{scan:?}");
}

/// Floquet `m±` of the periodic potential from the monodromy matrix.
fn floquet_m(mu: &SignedMeasure, x0: f64, z: C64) -> (C64, C64) {
    let m = transfer_matrix(mu, z, x0, x0 + 2.0 * PI, &SolverConfig::default()).unwrap().matrix;
    let half = (m.a + m.d) * 0.5;
    let root = (half * half - 1.0).sqrt();
    let (l1, l2) = (half + root, half - root);
    let (decay, grow) = if l1.norm() < l2.norm() { (l1, l2) } else { (l2, l1) };
    ((decay - m.a) / m.b, -(grow - m.a) / m.b)
}

#[test]
fn periodic_cosine_is_reflectionless_on_bands() {
    let mu = potentials::builtin("cos").unwrap();
    let defect = |t: f64| {
        let (p, m) = floquet_m(&mu, 100.0, C64::new(t, 1e-9));
        assert!(p.im >= 0.0 && m.im >= 0.0);
        (p + m.conj()).norm()
    };
    for t in [-0.37, -0.36, 0.65, 0.75, 0.85] {
        assert!(defect(t) < 1e-6, "band {t}: {}", defect(t));
    }
    for t in [-0.5, 0.0, 0.4] {
        assert!(defect(t) > 1e-2, "gap {t}: {}", defect(t));
    }
}

#[test]
fn denisov_rakhmanov_verdicts() {
    let inv = denisov_rakhmanov_check(&potentials::builtin("inverse-linear").unwrap(), 400.0, 101, &metric()).unwrap();
    assert!(inv.convergent, "{}", inv.tail_mean);
    let cos = denisov_rakhmanov_check(&potentials::builtin("cos").unwrap(), 390.0, 101, &metric()).unwrap();
    assert!(!cos.convergent, "{}", cos.tail_mean);
    let zero = denisov_rakhmanov_check(&SignedMeasure::zero(), 10.0, 11, &metric()).unwrap();
    assert!(zero.convergent && zero.trace.distances.iter().all(|&d| d == 0.0));
}

#[test]
fn trace_csv_and_representatives_json() {
    let t = shift_trace(&SignedMeasure::dirac(0.0, 1.0), &[0.0, 1.0], &SignedMeasure::zero(), &metric()).unwrap();
    let mut buf = Vec::new();
    t.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,distance");
    let om = omega_limit_estimate(&SignedMeasure::dirac(0.0, 1.0), &[0.0, 10.0], 4.0, 0.01, &metric(), 4).unwrap();
    let v: serde_json::Value = serde_json::from_str(&om.representatives_json()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), om.len());
}
