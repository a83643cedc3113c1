//! Reflectionless defect of -2 sech² against a square barrier.

use schrodinger_measures::potentials;
use schrodinger_measures::reflectionless::{g_decomposition, reflectionless_defect, BorelWindow};
use schrodinger_measures::weyl::{WeylConfig, DEFAULT_Y_SCHEDULE};

fn main() {
    let cfg = WeylConfig::default();
    let window = BorelWindow::interval(0.1, 5.0, 20).unwrap();
    for (name, mu) in [
        ("soliton", potentials::standard_soliton()),
        ("barrier", potentials::barrier(0.0, 1.0, 1.0).unwrap()),
    ] {
        let r = reflectionless_defect(&mu, 0.0, &window, &DEFAULT_Y_SCHEDULE, &cfg).unwrap();
        println!(
            "{name:8} max defect {:.3e}  mean {:.3e}  reflectionless on grid: {}",
            r.max_defect,
            r.mean_defect,
            r.verdict()
        );
    }
    let g = g_decomposition(&potentials::standard_soliton(), 0.0, 2.0, &DEFAULT_Y_SCHEDULE, &cfg).unwrap();
    println!("soliton at t = 2: g+ = {:.6}, g- = {:.6}", g.plus, g.minus);
}
