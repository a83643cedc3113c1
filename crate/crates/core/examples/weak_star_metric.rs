//! The weak-* metric: atoms sliding into the origin converge, atoms running
//! off to infinity do not.

use schrodinger_measures::measures::{metric_d, ClassBound, MetricConfig, SignedMeasure};

fn main() {
    let m = MetricConfig::default();
    let origin = SignedMeasure::dirac(0.0, 1.0);
    for n in [1, 4, 16, 64, 256] {
        let near = metric_d(&SignedMeasure::dirac(1.0 / n as f64, 1.0), &origin, &m).value;
        let far = metric_d(&SignedMeasure::dirac(n as f64, 1.0), &origin, &m).value;
        println!("n = {n:3}  d(δ_1/n, δ_0) = {near:.5}  d(δ_n, δ_0) = {far:.5}");
    }

    let mu = SignedMeasure::constant_density(-2.0, 2.0, 1.5).unwrap().with_atoms([(0.0, 0.8)]);
    for c in [1.0, 2.0, 3.0] {
        let r = mu.vc_membership(ClassBound::new(c).unwrap());
        println!("C = {c}: member {} (excess {:.3})", r.member, r.excess);
    }
}
