#![allow(dead_code)]

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schrodinger_measures::measures::SignedMeasure;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random density on `[lo, hi]` with values in `[-amp, amp]`, plus up to
/// `max_atoms` atoms of weight at most `atom` in `(lo, hi)`.
pub fn random_measure(r: &mut impl Rng, lo: f64, hi: f64, amp: f64, max_atoms: usize, atom: f64) -> SignedMeasure {
    let n = r.gen_range(2..12);
    let mut breaks: Vec<f64> = (0..n).map(|_| r.gen_range(lo..hi)).collect();
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let values = breaks.iter().map(|_| r.gen_range(-amp..=amp)).collect();
    let atoms: Vec<(f64, f64)> = (0..r.gen_range(0..=max_atoms))
        .map(|_| (r.gen_range(lo..hi), r.gen_range(-atom..=atom)))
        .collect();
    SignedMeasure::new(vec![], breaks, values).unwrap().with_atoms(atoms)
}

/// Adaptive Simpson on `[a, b]`.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    rec(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

/// `√z` with `Im ≥ 0`, computed independently of the library.
pub fn sqrt_upper(z: C64) -> C64 {
    let r = z.norm().sqrt();
    let th = z.im.atan2(z.re);
    let th = if th < 0.0 { th + 2.0 * std::f64::consts::PI } else { th };
    C64::from_polar(r, th / 2.0)
}

/// `m₊(0, z) = m₋(0, z)` for `-2 sech²` from the Jost solution
/// `e^{ikt}(k + i tanh t)/(k + i)`.
pub fn soliton_m(z: C64) -> C64 {
    let k = sqrt_upper(z);
    C64::i() * (k * k + 1.0) / k
}

/// `m₊(0, z)` for the barrier of height 1 on `(0, 1)`.
pub fn barrier_m_plus(z: C64) -> C64 {
    let k = sqrt_upper(z);
    let ik = C64::i() * k;
    let q = (C64::new(1.0, 0.0) - z).sqrt();
    let (ch, sh) = (q.cosh(), q.sinh());
    let shq = if q.norm() < 1e-8 { C64::new(1.0, 0.0) } else { sh / q };
    (-q * sh + ik * ch) / (ch - ik * shq)
}
