//! Ready-made potentials: sampled densities of standard examples and a small
//! name registry used by the command line.

use crate::measures::{MeasureError, SignedMeasure};

/// `-2 sech²(t - center)` sampled on `[center - half_width, center + half_width]`.
pub fn soliton(center: f64, half_width: f64, cells: usize) -> SignedMeasure {
    SignedMeasure::from_density_fn(
        |t| {
            let s = 1.0 / (t - center).cosh();
            -2.0 * s * s
        },
        center - half_width,
        center + half_width,
        cells,
    )
    .expect("valid interval")
}

/// One-soliton on `[-25, 25]` with step `0.004`.
pub fn standard_soliton() -> SignedMeasure {
    soliton(0.0, 25.0, 12_500)
}

/// Constant `height` on `(lo, hi)`.
pub fn barrier(lo: f64, hi: f64, height: f64) -> Result<SignedMeasure, MeasureError> {
    SignedMeasure::constant_density(lo, hi, height)
}

/// `amplitude · cos(t + phase)` on `[lo, hi]`.
pub fn cosine(amplitude: f64, phase: f64, lo: f64, hi: f64, cells: usize) -> SignedMeasure {
    SignedMeasure::from_density_fn(|t| amplitude * (t + phase).cos(), lo, hi, cells)
        .expect("valid interval")
}

/// `e^{-t}` on `[0, hi]`.
pub fn exp_decay(hi: f64, cells: usize) -> SignedMeasure {
    SignedMeasure::from_density_fn(|t| (-t).exp(), 0.0, hi, cells).expect("valid interval")
}

/// `(1 + t)^{-1}` on `[0, hi]`.
pub fn inverse_linear(hi: f64, cells: usize) -> SignedMeasure {
    SignedMeasure::from_density_fn(|t| 1.0 / (1.0 + t), 0.0, hi, cells).expect("valid interval")
}

/// `U(t) = sin(t²)/(1+t)`.
pub fn oscillating_u(t: f64) -> f64 {
    (t * t).sin() / (1.0 + t)
}

/// `U² + U'` for [`oscillating_u`], with the derivative taken analytically.
pub fn oscillating_v(t: f64) -> f64 {
    let u = oscillating_u(t);
    let du = 2.0 * t * (t * t).cos() / (1.0 + t) - (t * t).sin() / ((1.0 + t) * (1.0 + t));
    u * u + du
}

/// [`oscillating_v`] on `[0, hi]`.
pub fn oscillating(hi: f64, cells: usize) -> SignedMeasure {
    SignedMeasure::from_density_fn(oscillating_v, 0.0, hi, cells).expect("valid interval")
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 7] = [
    "free",
    "soliton",
    "barrier",
    "cos",
    "exp-decay",
    "inverse-linear",
    "oscillating",
];

/// Potentials addressable by name.
pub fn builtin(name: &str) -> Option<SignedMeasure> {
    Some(match name {
        "free" => SignedMeasure::zero(),
        "soliton" => standard_soliton(),
        "barrier" => barrier(0.0, 1.0, 1.0).expect("valid interval"),
        "cos" => cosine(1.0, 0.0, 0.0, 400.0, 40_000),
        "exp-decay" => exp_decay(60.0, 6_000),
        "inverse-linear" => inverse_linear(400.0, 40_000),
        "oscillating" => oscillating(50.0, 50_000),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete() {
        for name in BUILTIN_NAMES {
            assert!(builtin(name).is_some(), "{name}");
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn oscillating_derivative_matches_difference_quotient() {
        for &t in &[0.3, 2.0, 7.5] {
            let h = 1e-6;
            let fd = (oscillating_u(t + h) - oscillating_u(t - h)) / (2.0 * h);
            let u = oscillating_u(t);
            assert!((oscillating_v(t) - u * u - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn soliton_mass() {
        let mu = standard_soliton();
        assert!((mu.total_variation(-30.0, 30.0) - 4.0).abs() < 1e-4);
    }
}
