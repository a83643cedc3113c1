//! Calibrate and query a past-to-future oracle trained on phases of cos t.

use std::f64::consts::PI;

use schrodinger_measures::measures::{ClassBound, SignedMeasure};
use schrodinger_measures::oracle::{build_oracle, calibrate, predict};
use schrodinger_measures::potentials;

fn main() {
    let family: Vec<SignedMeasure> = (0..64)
        .map(|k| potentials::cosine(1.0, 2.0 * PI * k as f64 / 64.0, -40.0, 10.0, 5_000))
        .collect();
    let cal = calibrate(&family, &[0.0], 0.05, (0.0, 1.0), ClassBound::new(1.0).unwrap()).unwrap();
    let p = cal.params;
    println!("L = {}, delta = {}, leave-one-out error {:.4}", p.past_len, p.delta, cal.achieved_error);

    let model = build_oracle(&family, p).unwrap();
    println!("{} centers", model.centers.len());

    let long = potentials::builtin("cos").unwrap();
    for x in [41.0, 77.7, 123.4] {
        let s = long.shift(x);
        let pr = predict(&model, &p.past_of(&s)).unwrap();
        let err = p.future_metric().distance(&pr.future, &p.future_of(&s)).value;
        println!("x = {x:6}  d+ = {err:.4}  blended {} centers", pr.weights.indices().len());
    }
    match predict(&model, &SignedMeasure::zero()) {
        Ok(_) => println!("zero past accepted"),
        Err(e) => println!("zero past: {e}"),
    }
}
