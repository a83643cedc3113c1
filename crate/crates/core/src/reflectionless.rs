//! The reflectionless condition `m₊(x,t) = -conj(m₋(x,t))` on energy windows,
//! and diagnostics of `H = m₊ + m₋` on the real axis.
//!
//! Everything here is grid evidence: an a.e. statement is probed on finitely
//! many energies, and a pass is necessary but not sufficient.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::SignedMeasure;
use crate::schrodinger::C64;
use crate::weyl::{
    extrapolate, free_wavenumber, m_halfline, validate_schedule, BoundaryValue, Side, WeylConfig,
    WeylError,
};

/// Max-defect threshold behind [`ReflectionlessReport::verdict`].
pub const VERDICT_THRESHOLD: f64 = 5e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReflectionlessError {
    #[error("window interval ({0}, {1}) is empty or overlaps its neighbour")]
    BadWindow(f64, f64),
    #[error("energy grid is empty")]
    EmptyGrid,
    #[error("Im H(t + i0) vanishes at t = {0}; g± undefined")]
    NoAbsolutelyContinuousPart(f64),
    #[error(transparent)]
    Weyl(#[from] WeylError),
}

/// Finite union of disjoint energy intervals with sample energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BorelWindow {
    intervals: Vec<(f64, f64)>,
    grid: Vec<f64>,
}

impl BorelWindow {
    /// `(lo, hi)` with `n` equally spaced interior points
    /// `lo + (i+1)(hi-lo)/(n+1)`.
    pub fn interval(lo: f64, hi: f64, n: usize) -> Result<Self, ReflectionlessError> {
        Self::union(&[(lo, hi)], n)
    }

    /// Sorted disjoint intervals, each sampled at `n_each` interior points.
    pub fn union(intervals: &[(f64, f64)], n_each: usize) -> Result<Self, ReflectionlessError> {
        let mut iv = intervals.to_vec();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let grid = iv
            .iter()
            .flat_map(|&(lo, hi)| {
                (0..n_each).map(move |i| lo + (i + 1) as f64 * (hi - lo) / (n_each + 1) as f64)
            })
            .collect();
        Self::with_grid(iv, grid)
    }

    pub fn with_grid(intervals: Vec<(f64, f64)>, grid: Vec<f64>) -> Result<Self, ReflectionlessError> {
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            let overlaps = i > 0 && intervals[i - 1].1 > lo;
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || overlaps {
                return Err(ReflectionlessError::BadWindow(lo, hi));
            }
        }
        if grid.is_empty() {
            return Err(ReflectionlessError::EmptyGrid);
        }
        if let Some(&t) = grid
            .iter()
            .find(|&&t| !intervals.iter().any(|&(lo, hi)| lo <= t && t <= hi))
        {
            return Err(ReflectionlessError::BadWindow(t, t));
        }
        Ok(BorelWindow { intervals, grid })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
}

/// Boundary values of both m-functions at one energy.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectPoint {
    pub t: f64,
    pub m_plus: C64,
    pub m_minus: C64,
    /// `|m₊ + conj(m₋)|`.
    pub defect: f64,
    /// `hypot(Re m₊ + Re m₋, Im m₊ - Im m₋)`.
    pub defect_split: f64,
    /// Larger of the two extrapolation error proxies.
    pub error: f64,
    pub converged: bool,
}

impl DefectPoint {
    fn new(t: f64, p: &BoundaryValue, m: &BoundaryValue) -> Self {
        let (mp, mm) = (p.value, m.value);
        DefectPoint {
            t,
            m_plus: mp,
            m_minus: mm,
            defect: (mp + mm.conj()).norm(),
            defect_split: (mp.re + mm.re).hypot(mp.im - mm.im),
            error: p.error.max(m.error),
            converged: p.converged && m.converged,
        }
    }

    pub fn herglotz(&self) -> C64 {
        self.m_plus + self.m_minus
    }

    /// `(g₊, g₋)`, or `None` where `Im H` vanishes.
    pub fn g_pair(&self) -> Option<(f64, f64)> {
        let im = self.herglotz().im;
        if im.abs() <= 1e-8 * (1.0 + self.herglotz().norm()) {
            None
        } else {
            Some((self.m_plus.im / im, self.m_minus.im / im))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionlessReport {
    pub x: f64,
    pub y_schedule: Vec<f64>,
    pub points: Vec<DefectPoint>,
    /// Over converged points only; NaN if there are none.
    pub max_defect: f64,
    pub mean_defect: f64,
    pub nonconverged: usize,
}

impl ReflectionlessReport {
    fn from_points(x: f64, y_schedule: &[f64], points: Vec<DefectPoint>) -> Self {
        let good: Vec<f64> = points.iter().filter(|p| p.converged).map(|p| p.defect).collect();
        let (max_defect, mean_defect) = if good.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (
                good.iter().copied().fold(0.0, f64::max),
                good.iter().sum::<f64>() / good.len() as f64,
            )
        };
        ReflectionlessReport {
            x,
            y_schedule: y_schedule.to_vec(),
            nonconverged: points.len() - good.len(),
            points,
            max_defect,
            mean_defect,
        }
    }

    /// Grid evidence for reflectionlessness: max defect below
    /// [`VERDICT_THRESHOLD`] on converged points.
    pub fn verdict(&self) -> bool {
        self.max_defect < VERDICT_THRESHOLD
    }

    /// CSV `(t, defect, Re H, g₊, g₋, converged)`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,defect,re_h,g_plus,g_minus,converged")?;
        for p in &self.points {
            let (gp, gm) = p.g_pair().unwrap_or((f64::NAN, f64::NAN));
            writeln!(
                w,
                "{},{},{},{},{},{}",
                p.t,
                p.defect,
                p.herglotz().re,
                gp,
                gm,
                p.converged
            )?;
        }
        Ok(())
    }
}

fn both_sides(
    mu: &SignedMeasure,
    x: f64,
    t: f64,
    y_schedule: &[f64],
    cfg: &WeylConfig,
) -> Result<DefectPoint, WeylError> {
    let mut plus = Vec::with_capacity(y_schedule.len());
    let mut minus = Vec::with_capacity(y_schedule.len());
    for &y in y_schedule {
        let z = C64::new(t, y);
        plus.push((y, m_halfline(mu, x, z, Side::Plus, cfg)?.value));
        minus.push((y, m_halfline(mu, x, z, Side::Minus, cfg)?.value));
    }
    Ok(DefectPoint::new(t, &extrapolate(t, plus), &extrapolate(t, minus)))
}

pub fn reflectionless_defect(
    mu: &SignedMeasure,
    x: f64,
    window: &BorelWindow,
    y_schedule: &[f64],
    cfg: &WeylConfig,
) -> Result<ReflectionlessReport, ReflectionlessError> {
    validate_schedule(y_schedule)?;
    let points = window
        .grid
        .par_iter()
        .map(|&t| both_sides(mu, x, t, y_schedule, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReflectionlessReport::from_points(x, y_schedule, points))
}

#[derive(Debug, Clone, PartialEq)]
pub struct XIndependence {
    pub reports: Vec<ReflectionlessReport>,
    /// Largest difference between the max defects of two reports.
    pub spread: f64,
}

pub fn x_independence_check(
    mu: &SignedMeasure,
    xs: &[f64],
    window: &BorelWindow,
    y_schedule: &[f64],
    cfg: &WeylConfig,
) -> Result<XIndependence, ReflectionlessError> {
    let reports = xs
        .iter()
        .map(|&x| reflectionless_defect(mu, x, window, y_schedule, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let maxes = reports.iter().map(|r| r.max_defect);
    let hi = maxes.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = maxes.fold(f64::INFINITY, f64::min);
    Ok(XIndependence { spread: (hi - lo).max(0.0), reports })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GPair {
    pub plus: f64,
    pub minus: f64,
    pub im_h: f64,
}

/// `g± = Im m±(t+i0) / Im H(t+i0)`.
pub fn g_decomposition(
    mu: &SignedMeasure,
    x: f64,
    t: f64,
    y_schedule: &[f64],
    cfg: &WeylConfig,
) -> Result<GPair, ReflectionlessError> {
    validate_schedule(y_schedule)?;
    let p = both_sides(mu, x, t, y_schedule, cfg)?;
    let (plus, minus) = p
        .g_pair()
        .ok_or(ReflectionlessError::NoAbsolutelyContinuousPart(t))?;
    Ok(GPair { plus, minus, im_h: p.herglotz().im })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub t: f64,
    pub re_h: f64,
    pub converged: bool,
}

/// `Re H(t + i0)` over the window grid.
pub fn phase_check(
    mu: &SignedMeasure,
    x: f64,
    window: &BorelWindow,
    y_schedule: &[f64],
    cfg: &WeylConfig,
) -> Result<Vec<PhasePoint>, ReflectionlessError> {
    let r = reflectionless_defect(mu, x, window, y_schedule, cfg)?;
    Ok(r.points
        .iter()
        .map(|p| PhasePoint { t: p.t, re_h: p.herglotz().re, converged: p.converged })
        .collect())
}

/// `H` of the zero potential, `2i√z`.
pub fn free_herglotz(z: C64) -> C64 {
    C64::new(0.0, 2.0) * free_wavenumber(z)
}

/// `(1/π) Im H(t + i0)`, the density of the spectral measure of `H`.
pub fn spectral_density(
    mu: &SignedMeasure,
    x: f64,
    t: f64,
    y_schedule: &[f64],
    cfg: &WeylConfig,
) -> Result<f64, ReflectionlessError> {
    validate_schedule(y_schedule)?;
    Ok(both_sides(mu, x, t, y_schedule, cfg)?.herglotz().im / PI)
}

/// `-c/√2 + (c/π) ∫₀^∞ (1/(t-z) - t/(t²+1)) t^{1/2} dt` by double-exponential
/// quadrature; equals `c·i√z` for `Im z > 0`.
pub fn herglotz_representation(z: C64, c: f64, tol: f64) -> C64 {
    // t = s², s = u/(1-u)
    let integrand = |u: f64| -> C64 {
        if u <= 0.0 || u >= 1.0 {
            return if u >= 1.0 { 2.0 * z } else { C64::new(0.0, 0.0) };
        }
        let s = u / (1.0 - u);
        let t = s * s;
        // 1/(t-z) - t/(t²+1) without cancellation
        let kernel = (1.0 + z * t) / ((t - z) * (t * t + 1.0));
        kernel * (2.0 * t) / ((1.0 - u) * (1.0 - u))
    };
    // split at the peak s = √(Re z)
    let s0 = z.re.max(0.0).sqrt();
    let u0 = s0 / (1.0 + s0);
    let mut cuts = vec![0.0];
    if u0 > 0.0 {
        cuts.push(u0);
    }
    cuts.push(1.0);
    let (mut re, mut im) = (0.0, 0.0);
    for w in cuts.windows(2) {
        re += quadrature::double_exponential::integrate(|u| integrand(u).re, w[0], w[1], tol).integral;
        im += quadrature::double_exponential::integrate(|u| integrand(u).im, w[0], w[1], tol).integral;
    }
    C64::new(-c * FRAC_1_SQRT_2, 0.0) + C64::new(re, im) * (c / PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weyl::DEFAULT_Y_SCHEDULE;

    #[test]
    fn window_grid_is_interior() {
        let w = BorelWindow::interval(0.0, 1.0, 3).unwrap();
        assert_eq!(w.grid(), &[0.25, 0.5, 0.75]);
        assert!(BorelWindow::interval(1.0, 1.0, 3).is_err());
        assert!(BorelWindow::union(&[(0.0, 2.0), (1.0, 3.0)], 2).is_err());
        assert_eq!(BorelWindow::interval(0.0, 1.0, 0), Err(ReflectionlessError::EmptyGrid));
    }

    #[test]
    fn free_is_reflectionless() {
        let w = BorelWindow::interval(0.1, 5.0, 6).unwrap();
        let r = reflectionless_defect(&SignedMeasure::zero(), 0.0, &w, &DEFAULT_Y_SCHEDULE, &WeylConfig::default())
            .unwrap();
        assert!(r.max_defect < 1e-6);
        assert!(r.verdict());
        for p in &r.points {
            assert!((p.defect - p.defect_split).abs() < 1e-12);
        }
    }

    #[test]
    fn free_g_is_half() {
        let g = g_decomposition(&SignedMeasure::zero(), 0.0, 1.0, &DEFAULT_Y_SCHEDULE, &WeylConfig::default()).unwrap();
        assert!((g.plus - 0.5).abs() < 1e-12 && (g.minus - 0.5).abs() < 1e-12);
    }

    #[test]
    fn below_spectrum_has_no_g() {
        let e = g_decomposition(&SignedMeasure::zero(), 0.0, -1.0, &DEFAULT_Y_SCHEDULE, &WeylConfig::default());
        assert_eq!(e, Err(ReflectionlessError::NoAbsolutelyContinuousPart(-1.0)));
    }

    #[test]
    fn representation_matches_closed_form() {
        for z in [C64::new(0.0, 1.0), C64::new(-2.0, 0.5), C64::new(3.0, 2.0)] {
            let h = herglotz_representation(z, 2.0, 1e-12);
            assert!((h - free_herglotz(z)).norm() < 1e-8, "{z}: {h}");
        }
        let s = std::f64::consts::SQRT_2;
        assert!((free_herglotz(C64::new(0.0, 1.0)) - C64::new(-s, s)).norm() < 1e-15);
    }
}
