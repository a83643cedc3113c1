//! Shift traces and an ω-limit estimate for cos(t).

use schrodinger_measures::dynamics::{omega_limit_estimate, shift_trace, DEFAULT_WINDOW};
use schrodinger_measures::measures::{MetricConfig, SignedMeasure};
use schrodinger_measures::potentials;

fn main() {
    let m = MetricConfig::default();
    let decay = potentials::exp_decay(60.0, 6_000);
    let xs: Vec<f64> = (0..=5).map(|i| 4.0 * i as f64).collect();
    let t = shift_trace(&decay, &xs, &SignedMeasure::zero(), &m).unwrap();
    for (x, d) in t.x_samples.iter().zip(&t.distances) {
        println!("e^-t  x = {x:4}  d = {d:.3e}");
    }

    let cos = potentials::builtin("cos").unwrap();
    let xs: Vec<f64> = (0..=130).map(|i| 100.0 + 0.05 * i as f64).collect();
    let om = omega_limit_estimate(&cos, &xs, DEFAULT_WINDOW, 0.05, &m, 256).unwrap();
    println!("cos: {} clusters from {} shifts, first at x = {:?}", om.len(), xs.len(), &om.representative_x[..4]);
}
