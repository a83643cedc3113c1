//! Decay verdicts for 1/(1+t), cos t and sin(t²)/(1+t)-type potentials.

use schrodinger_measures::dynamics::denisov_rakhmanov_check;
use schrodinger_measures::measures::MetricConfig;
use schrodinger_measures::potentials;

fn main() {
    let m = MetricConfig::default();
    for (name, x_max) in [("inverse-linear", 400.0), ("cos", 390.0), ("oscillating", 45.0)] {
        let mu = potentials::builtin(name).unwrap();
        let r = denisov_rakhmanov_check(&mu, x_max, 101, &m).unwrap();
        println!("{name:15} tail mean {:.3e}  convergent: {}", r.tail_mean, r.convergent);
    }
}
