//! Half-line Titchmarsh–Weyl m-functions `m±(x, z) = ±f±'(x)/f±(x)` with a
//! Dirichlet condition at `x`.
//!
//! `m±` is approximated by the centers of Weyl disks: the images of the real
//! boundary-condition line at `x ± R` under the Möbius action of the transfer
//! matrix. Finite-data measures vanish beyond their support, where the
//! square-integrable solution is the plane wave `e^{±ikt}`; once the
//! truncation point clears the support the disk sequence is closed exactly by
//! feeding the free half-line value `i√z` through the same Möbius map.
//!
//! Branch convention: the free m-function is `m₀(z) = i√z` with the
//! principal root, which is the Herglotz branch and equals `-κ` at
//! `z = -κ²`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::SignedMeasure;
use crate::schrodinger::{
    propagate_normalized, transfer_matrix_scaled, Mat2, SolverConfig, SolverError, C64,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WeylError {
    #[error("energy {0} is not in the open upper half-plane")]
    NotUpperHalfPlane(C64),
    #[error("atom of weight {weight} at the evaluation point {x}")]
    AtomAtPoint { x: f64, weight: f64 },
    #[error("Weyl disk radius {radius:e} still above tolerance at R = {r}")]
    NotConverged { r: f64, radius: f64 },
    #[error("Weyl disk is numerically degenerate at R = {r}")]
    DegenerateDisk { r: f64 },
    #[error("m+ + m- vanishes at z = {z}: G(x, x; z) has a pole")]
    Pole { z: C64 },
    #[error("y schedule must be strictly decreasing positive values with at least two entries")]
    BadSchedule,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }
}

/// `√z` on the branch with `Im ≥ 0`.
pub fn free_wavenumber(z: C64) -> C64 {
    // normalize a negative zero imaginary part so that z = -κ² gives iκ
    let z = C64::new(z.re, if z.im == 0.0 { 0.0 } else { z.im });
    let k = z.sqrt();
    if k.im < 0.0 {
        -k
    } else {
        k
    }
}

/// m-function of the zero potential on either half-line.
pub fn free_m(z: C64) -> C64 {
    C64::new(0.0, 1.0) * free_wavenumber(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylConfig {
    /// Target disk radius.
    pub tol: f64,
    pub r_start: f64,
    pub r_max: f64,
    pub solver: SolverConfig,
}

impl Default for WeylConfig {
    fn default() -> Self {
        WeylConfig {
            tol: 1e-10,
            r_start: 1.0,
            r_max: 200.0,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylDisk {
    pub center: C64,
    pub radius: f64,
    pub z: C64,
    pub x: f64,
    pub side: Side,
    pub truncation_r: f64,
}

impl WeylDisk {
    pub fn contains(&self, w: C64, slack: f64) -> bool {
        (w - self.center).norm() <= self.radius + slack
    }
}

/// How an m-function sample was closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// Center of a disk with radius below tolerance.
    Disk,
    /// Exact limit point through the free tail beyond the support.
    FreeTail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MFunctionSample {
    pub x: f64,
    pub z: C64,
    pub side: Side,
    pub value: C64,
    pub truncation_r: f64,
    /// Disk radius for [`Closure::Disk`]; integrator tolerance times `|m|`
    /// for [`Closure::FreeTail`].
    pub error_estimate: f64,
    pub closure: Closure,
}

/// Möbius coefficients `(A, B, C, D)` with `m(h) = (A h + B)/(C h + D)`,
/// `h` the logarithmic derivative at the far end.
fn mobius(t: &Mat2, side: Side) -> (C64, C64, C64, C64) {
    match side {
        Side::Plus => (t.a, -t.c, -t.b, t.d),
        Side::Minus => (-t.d, -t.c, t.b, t.a),
    }
}

fn far_end(x: f64, r: f64, side: Side) -> f64 {
    match side {
        Side::Plus => x + r,
        Side::Minus => x - r,
    }
}

fn path_matrix(
    mu: &SignedMeasure,
    x: f64,
    far: f64,
    z: C64,
    side: Side,
    cfg: &SolverConfig,
) -> Result<Mat2, SolverError> {
    // the matrix always maps the left end of the interval to the right end
    let (m, _) = match side {
        Side::Plus => transfer_matrix_scaled(mu, z, x, far, cfg)?,
        Side::Minus => transfer_matrix_scaled(mu, z, far, x, cfg)?,
    };
    Ok(m)
}

fn check_point(mu: &SignedMeasure, x: f64) -> Result<(), WeylError> {
    let w = mu.atom_at(x);
    if w != 0.0 {
        return Err(WeylError::AtomAtPoint { x, weight: w });
    }
    Ok(())
}

/// Weyl disk for the problem on `(x, x+R)` or `(x-R, x)`.
pub fn weyl_disk(
    mu: &SignedMeasure,
    x: f64,
    z: C64,
    side: Side,
    r: f64,
    cfg: &WeylConfig,
) -> Result<WeylDisk, WeylError> {
    if !(z.im > 0.0) {
        return Err(WeylError::NotUpperHalfPlane(z));
    }
    check_point(mu, x)?;
    let mut far = far_end(x, r, side);
    if mu.atom_at(far) != 0.0 {
        far = far_end(x, r + 1e-9, side);
    }
    let t = path_matrix(mu, x, far, z, side, &cfg.solver)?;
    let (a, b, c, d) = mobius(&t, side);
    let denom = c * d.conj() - d * c.conj();
    let scale = (c.norm() * d.norm()).max(f64::MIN_POSITIVE);
    if denom.norm() <= 1e-300 || denom.norm() / scale < 1e-15 {
        return Err(WeylError::DegenerateDisk { r });
    }
    let center = (a * d.conj() - b * c.conj()) / denom;
    let radius = (a * d - b * c).norm() / denom.norm();
    Ok(WeylDisk { center, radius, z, x, side, truncation_r: r })
}

/// Exact m-function of a finite-data measure, valid for `Im z ≥ 0`
/// (`z ≠ 0`); on the real axis this is the limit from above.
pub fn m_exact(
    mu: &SignedMeasure,
    x: f64,
    z: C64,
    side: Side,
    cfg: &SolverConfig,
) -> Result<C64, WeylError> {
    check_point(mu, x)?;
    let k = free_wavenumber(z);
    let ik = C64::new(0.0, 1.0) * k;
    let Some((lo, hi)) = mu.support() else {
        return Ok(ik);
    };
    let one = C64::new(1.0, 0.0);
    match side {
        Side::Plus => {
            if x > hi {
                return Ok(ik);
            }
            let s = hi + 1.0;
            let ((f, df), _) = propagate_normalized(mu, z, s, x, (one, ik), cfg)?;
            Ok(df / f)
        }
        Side::Minus => {
            if x < lo {
                return Ok(ik);
            }
            let s = lo - 1.0;
            let ((f, df), _) = propagate_normalized(mu, z, s, x, (one, -ik), cfg)?;
            Ok(-df / f)
        }
    }
}

/// `m±(x, z)` for `Im z > 0`, closing the Weyl-disk sequence `R = r_start,
/// 2 r_start, …` as soon as the radius is below `cfg.tol` or the truncation
/// point leaves the support.
pub fn m_halfline(
    mu: &SignedMeasure,
    x: f64,
    z: C64,
    side: Side,
    cfg: &WeylConfig,
) -> Result<MFunctionSample, WeylError> {
    if !(z.im > 0.0) {
        return Err(WeylError::NotUpperHalfPlane(z));
    }
    check_point(mu, x)?;
    let reach = match (mu.support(), side) {
        (None, _) => 0.0,
        (Some((_, hi)), Side::Plus) => (hi - x).max(0.0),
        (Some((lo, _)), Side::Minus) => (x - lo).max(0.0),
    };
    let mut r = cfg.r_start;
    let mut last_radius = f64::INFINITY;
    loop {
        if r >= reach {
            let value = m_exact(mu, x, z, side, &cfg.solver)?;
            return Ok(MFunctionSample {
                x,
                z,
                side,
                value,
                truncation_r: reach,
                error_estimate: cfg.solver.rtol * value.norm(),
                closure: Closure::FreeTail,
            });
        }
        if r > cfg.r_max {
            return Err(WeylError::NotConverged { r: cfg.r_max, radius: last_radius });
        }
        let disk = weyl_disk(mu, x, z, side, r, cfg)?;
        last_radius = disk.radius;
        if disk.radius < cfg.tol {
            return Ok(MFunctionSample {
                x,
                z,
                side,
                value: disk.center,
                truncation_r: r,
                error_estimate: disk.radius,
                closure: Closure::Disk,
            });
        }
        r *= 2.0;
    }
}

/// Limit `y → 0+` of `m(x, t + iy)` by polynomial extrapolation in `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryValue {
    pub t: f64,
    pub value: C64,
    /// Size of the last extrapolation increment.
    pub error: f64,
    /// False when the increments stop decreasing.
    pub converged: bool,
    pub samples: Vec<(f64, C64)>,
}

/// Neville extrapolation to `y = 0` using the first `k` points, for every `k`.
fn extrapolations(points: &[(f64, C64)]) -> Vec<C64> {
    let n = points.len();
    let mut out = Vec::with_capacity(n);
    let mut table: Vec<C64> = points.iter().map(|p| p.1).collect();
    // table[i] holds P_{i..=i+level}(0) after each level
    out.push(table[0]);
    for level in 1..n {
        for i in 0..n - level {
            let (yi, yj) = (points[i].0, points[i + level].0);
            table[i] = (table[i + 1] * yi - table[i] * yj) / (yi - yj);
        }
        out.push(table[0]);
    }
    out
}

pub fn boundary_value(
    mu: &SignedMeasure,
    x: f64,
    t: f64,
    side: Side,
    y_schedule: &[f64],
    cfg: &WeylConfig,
) -> Result<BoundaryValue, WeylError> {
    validate_schedule(y_schedule)?;
    let samples = y_schedule
        .iter()
        .map(|&y| m_halfline(mu, x, C64::new(t, y), side, cfg).map(|s| (y, s.value)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(extrapolate(t, samples))
}

pub(crate) fn validate_schedule(y_schedule: &[f64]) -> Result<(), WeylError> {
    let ok = y_schedule.len() >= 2
        && y_schedule.iter().all(|&y| y > 0.0 && y.is_finite())
        && y_schedule.windows(2).all(|w| w[1] < w[0]);
    if ok {
        Ok(())
    } else {
        Err(WeylError::BadSchedule)
    }
}

pub(crate) fn extrapolate(t: f64, samples: Vec<(f64, C64)>) -> BoundaryValue {
    let est = extrapolations(&samples);
    let incs: Vec<f64> = est.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let value = *est.last().unwrap();
    let floor = 1e-12 * (1.0 + value.norm());
    let converged = incs.windows(2).all(|w| w[1] <= w[0] || w[1] <= floor);
    BoundaryValue {
        t,
        value,
        error: *incs.last().unwrap(),
        converged,
        samples,
    }
}

/// Default `y` schedule for boundary values.
pub const DEFAULT_Y_SCHEDULE: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Diagonal of the Green function computed two ways.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenDiagonal {
    /// `-1/(m₊ + m₋)`.
    pub value: C64,
    /// `f₊(x) f₋(x) / W(f₊, f₋)` with the Wronskian taken beyond the support.
    pub via_wronskian: C64,
    pub m_plus: C64,
    pub m_minus: C64,
}

impl GreenDiagonal {
    pub fn route_gap(&self) -> f64 {
        (self.value - self.via_wronskian).norm()
    }
}

pub fn green_diagonal(
    mu: &SignedMeasure,
    x: f64,
    z: C64,
    cfg: &SolverConfig,
) -> Result<GreenDiagonal, WeylError> {
    if z.im < 0.0 {
        return Err(WeylError::NotUpperHalfPlane(z));
    }
    let m_plus = m_exact(mu, x, z, Side::Plus, cfg)?;
    let m_minus = m_exact(mu, x, z, Side::Minus, cfg)?;
    let h = m_plus + m_minus;
    if h.norm() <= 1e-13 * (1.0 + m_plus.norm() + m_minus.norm()) {
        return Err(WeylError::Pole { z });
    }
    let value = -1.0 / h;

    let k = free_wavenumber(z);
    let ik = C64::new(0.0, 1.0) * k;
    let one = C64::new(1.0, 0.0);
    let (lo, hi) = mu.support().unwrap_or((x, x));
    let left = lo.min(x) - 1.0;
    let right = hi.max(x) + 1.0;
    let ((fp, _), sp) = propagate_normalized(mu, z, right, x, (one, ik), cfg)?;
    let ((fm, _), sm) = propagate_normalized(mu, z, left, x, (one, -ik), cfg)?;
    let ((fr, dfr), sr) = propagate_normalized(mu, z, left, right, (one, -ik), cfg)?;
    // f₊ = (1, ik) at `right`
    let w = dfr - ik * fr;
    let via_wronskian = fp * fm / w * (sp + sm - sr).exp();
    Ok(GreenDiagonal { value, via_wronskian, m_plus, m_minus })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticRow {
    pub kappa: f64,
    /// `m₊(x, -κ²) + κ`.
    pub plus: f64,
    /// `m₋(x, -κ²) + κ`.
    pub minus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticTable {
    pub rows: Vec<AsymptoticRow>,
}

impl AsymptoticTable {
    /// Smallest `c` with `|residual| ≤ c/κ` on every row.
    pub fn fitted_constant(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.kappa * r.plus.abs().max(r.minus.abs()))
            .fold(0.0, f64::max)
    }

    /// Residual magnitude at the largest κ is below that at the smallest.
    pub fn decays(&self) -> bool {
        match (self.rows.first(), self.rows.last()) {
            (Some(a), Some(b)) => {
                b.plus.abs().max(b.minus.abs()) <= a.plus.abs().max(a.minus.abs())
            }
            _ => true,
        }
    }
}

/// Residuals `m±(x, -κ²) + κ` along `kappas`.
pub fn asymptotic_check(
    mu: &SignedMeasure,
    x: f64,
    kappas: &[f64],
    cfg: &SolverConfig,
) -> Result<AsymptoticTable, WeylError> {
    let rows = kappas
        .iter()
        .map(|&kappa| {
            let z = C64::new(-kappa * kappa, 0.0);
            let p = m_exact(mu, x, z, Side::Plus, cfg)?;
            let m = m_exact(mu, x, z, Side::Minus, cfg)?;
            Ok(AsymptoticRow { kappa, plus: p.re + kappa, minus: m.re + kappa })
        })
        .collect::<Result<Vec<_>, WeylError>>()?;
    Ok(AsymptoticTable { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    /// `sup_z |m(z; μ_n) - m(z; μ)|` for each member of the sequence.
    pub deviations: Vec<f64>,
}

impl ContinuityReport {
    pub fn is_monotone(&self) -> bool {
        self.deviations.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Deviations of the m-functions of `sequence` from those of `limit` over
/// `z_grid` (maximum over the requested sides).
pub fn m_continuity_test(
    sequence: &[SignedMeasure],
    limit: &SignedMeasure,
    x: f64,
    z_grid: &[C64],
    sides: &[Side],
    cfg: &WeylConfig,
) -> Result<ContinuityReport, WeylError> {
    let reference = z_grid
        .iter()
        .flat_map(|&z| sides.iter().map(move |&s| (z, s)))
        .map(|(z, s)| m_halfline(limit, x, z, s, cfg).map(|m| m.value))
        .collect::<Result<Vec<_>, _>>()?;
    let deviations = sequence
        .par_iter()
        .map(|mu| {
            let mut worst = 0.0f64;
            let mut i = 0;
            for &z in z_grid {
                for &s in sides {
                    let m = m_halfline(mu, x, z, s, cfg)?.value;
                    worst = worst.max((m - reference[i]).norm());
                    i += 1;
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<f64>, WeylError>>()?;
    Ok(ContinuityReport { deviations })
}

/// Value of `H = m₊ + m₋` at `t + iy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HerglotzSample {
    pub t: f64,
    pub y: f64,
    pub value: C64,
}

pub fn herglotz_sum(
    mu: &SignedMeasure,
    x: f64,
    t: f64,
    y: f64,
    cfg: &WeylConfig,
) -> Result<HerglotzSample, WeylError> {
    let z = C64::new(t, y);
    let p = m_halfline(mu, x, z, Side::Plus, cfg)?.value;
    let m = m_halfline(mu, x, z, Side::Minus, cfg)?.value;
    Ok(HerglotzSample { t, y, value: p + m })
}

/// Writes samples as CSV `(x, side, Re z, Im z, Re m, Im m, R, disk_radius)`.
pub fn write_samples_csv<W: Write>(mut w: W, samples: &[MFunctionSample]) -> std::io::Result<()> {
    writeln!(w, "x,side,re_z,im_z,re_m,im_m,R,disk_radius")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            s.x,
            s.side.as_str(),
            s.z.re,
            s.z.im,
            s.value.re,
            s.value.im,
            s.truncation_r,
            s.error_estimate
        )?;
    }
    Ok(())
}
