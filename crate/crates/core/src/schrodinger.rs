//! Solutions of `-f'' + f μ = z f` for finite-data measures.
//!
//! Between the nodes of `μ` (density breaks and atoms) the potential is a
//! linear function and the first-order system for `(f, f')` is integrated
//! with an adaptive fourth-order Magnus scheme; the exponential of a
//! traceless 2×2 generator has unit determinant, so every step conserves the
//! Wronskian to rounding. Constant pieces use the closed-form propagator. At
//! an atom of weight `α` the derivative jumps, `f'(c+) = f'(c-) + α f(c)`.

use std::io::Write;

use num_complex::Complex64;
use thiserror::Error;

use crate::measures::SignedMeasure;

pub type C64 = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("atom of weight {weight} sits exactly at evaluation point {position}; perturb the endpoint")]
    AtomAtEndpoint { position: f64, weight: f64 },
    #[error("step size underflow at x = {x} (h = {h:e})")]
    StepUnderflow { x: f64, h: f64 },
    #[error("initial data (0, 0) gives the trivial solution")]
    ZeroInitialData,
    #[error("quasi-derivative initial data cannot be converted at x0 = {x0}")]
    DegenerateQuasiInit { x0: f64 },
    #[error("non-finite solution value near x = {x}")]
    NonFinite { x: f64 },
}

/// 2×2 complex matrix `[[a, b], [c, d]]` acting on `(f, f')` column vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Mat2 {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn identity() -> Self {
        let o = C64::new(1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        Mat2::new(o, z, z, o)
    }

    /// Jump across an atom of weight `alpha`, traversed left to right.
    pub fn atom_jump(alpha: f64) -> Self {
        let mut m = Mat2::identity();
        m.c = C64::new(alpha, 0.0);
        m
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn apply(&self, v: (C64, C64)) -> (C64, C64) {
        (self.a * v.0 + self.b * v.1, self.c * v.0 + self.d * v.1)
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    /// Adjugate; the inverse when `det = 1`.
    pub fn adjugate(&self) -> Mat2 {
        Mat2::new(self.d, -self.b, -self.c, self.a)
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.norm().max(self.b.norm()).max(self.c.norm()).max(self.d.norm())
    }

    pub fn trace(&self) -> C64 {
        self.a + self.d
    }

    fn sub(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a - o.a, self.b - o.b, self.c - o.c, self.d - o.d)
    }

    fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d].iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// Transfer matrix mapping `(f, f')` at `x0` to `(f, f')` at `x1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrix {
    pub matrix: Mat2,
    pub z: C64,
    pub x0: f64,
    pub x1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.5,
            min_step: 1e-13,
        }
    }
}

/// Elementary propagation event along a path, matrices oriented in the
/// direction of travel.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Event {
    Flow { from: f64, to: f64, v_from: f64, v_to: f64, m: Mat2 },
    Jump { at: f64, m: Mat2 },
}

/// `cosh(s)` and `sinh(s)/s` given `w = s²`; both are even in `s`.
fn cosh_sinhc(w: C64) -> (C64, C64) {
    if w.norm() < 1e-6 {
        let ch = 1.0 + w / 2.0 + w * w / 24.0;
        let shc = 1.0 + w / 6.0 + w * w / 120.0;
        (ch, shc)
    } else {
        let s = w.sqrt();
        (s.cosh(), s.sinh() / s)
    }
}

/// `exp` of the traceless matrix `[[e, p], [g, -e]]`.
fn exp_traceless(e: C64, p: C64, g: C64) -> Mat2 {
    let (ch, shc) = cosh_sinhc(e * e + p * g);
    Mat2::new(ch + shc * e, shc * p, shc * g, ch - shc * e)
}

/// Exact propagator over signed length `h` for constant potential `v`.
pub(crate) fn constant_step(v: f64, z: C64, h: f64) -> Mat2 {
    // generator [[0, 1], [v - z, 0]] times h
    let hc = C64::new(h, 0.0);
    exp_traceless(C64::new(0.0, 0.0), hc, (v - z) * h)
}

/// Fourth-order Magnus step with Gauss nodes; `h` may be negative.
fn magnus_step(x: f64, h: f64, pot: &impl Fn(f64) -> f64, z: C64) -> Mat2 {
    const R3_6: f64 = 0.288_675_134_594_812_9; // √3/6
    const R3_12: f64 = 0.144_337_567_297_406_44; // √3/12
    let q1 = pot(x + h * (0.5 - R3_6)) - z;
    let q2 = pot(x + h * (0.5 + R3_6)) - z;
    let e = (q1 - q2) * (R3_12 * h * h);
    let g = (q1 + q2) * (0.5 * h);
    exp_traceless(e, C64::new(h, 0.0), g)
}

struct Walker<'a> {
    mu: &'a SignedMeasure,
    z: C64,
    cfg: SolverConfig,
    h_try: f64,
    /// Endpoint atoms are then skipped rather than rejected.
    endpoint_atoms_allowed: bool,
}

impl<'a> Walker<'a> {
    fn new(mu: &'a SignedMeasure, z: C64, cfg: SolverConfig) -> Self {
        Walker { mu, z, cfg, h_try: cfg.max_step, endpoint_atoms_allowed: false }
    }

    /// Visits the events from `x0` to `x1` (either order).
    fn walk(&mut self, x0: f64, x1: f64, mut emit: impl FnMut(Event)) -> Result<(), SolverError> {
        if !self.endpoint_atoms_allowed {
            for &x in &[x0, x1] {
                let w = self.mu.atom_at(x);
                if w != 0.0 {
                    return Err(SolverError::AtomAtEndpoint { position: x, weight: w });
                }
            }
        }
        if x0 == x1 {
            return Ok(());
        }
        let (lo, hi) = if x0 < x1 { (x0, x1) } else { (x1, x0) };
        let mut nodes: Vec<f64> = self
            .mu
            .density()
            .breaks
            .iter()
            .copied()
            .filter(|&b| b > lo && b < hi)
            .chain(self.mu.atoms_in(lo, hi).iter().map(|a| a.0))
            .collect();
        nodes.push(lo);
        nodes.push(hi);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        if x1 < x0 {
            nodes.reverse();
        }
        let forward = x1 > x0;
        for (i, w) in nodes.windows(2).enumerate() {
            let (p, q) = (w[0], w[1]);
            if i > 0 {
                let alpha = self.mu.atom_at(p);
                if alpha != 0.0 {
                    let m = Mat2::atom_jump(if forward { alpha } else { -alpha });
                    emit(Event::Jump { at: p, m });
                }
            }
            let (a, b) = if forward { (p, q) } else { (q, p) };
            let v_a = self.mu.density().limits(a).1;
            let v_b = self.mu.density().limits(b).0;
            let (v_p, v_q) = if forward { (v_a, v_b) } else { (v_b, v_a) };
            self.flow(p, q, v_p, v_q, &mut emit)?;
        }
        Ok(())
    }

    fn flow(
        &mut self,
        p: f64,
        q: f64,
        v_p: f64,
        v_q: f64,
        emit: &mut impl FnMut(Event),
    ) -> Result<(), SolverError> {
        let len = q - p;
        let pot = move |x: f64| v_p + (v_q - v_p) * (x - p) / len;
        if v_p == v_q {
            // exact; split so that entries stay representable
            let k_im = (self.z - v_p).sqrt().im.abs();
            let chunk = if k_im > 0.0 { (20.0 / k_im).max(1e-3) } else { f64::INFINITY };
            let n = ((len.abs() / chunk).ceil() as usize).max(1);
            let hstep = len / n as f64;
            for i in 0..n {
                let from = p + i as f64 * hstep;
                let to = if i + 1 == n { q } else { from + hstep };
                let m = constant_step(v_p, self.z, to - from);
                emit(Event::Flow { from, to, v_from: v_p, v_to: v_p, m });
            }
            return Ok(());
        }
        let dir = len.signum();
        let mut x = p;
        let scale = 1.0 + v_p.abs().max(v_q.abs()) + self.z.norm();
        let natural = 1.0 / scale.sqrt();
        let mut h = self.h_try.min(natural * 4.0).min(self.cfg.max_step);
        while (q - x) * dir > 0.0 {
            let rem = (q - x).abs();
            let last = h >= rem;
            let hs = if last { rem } else { h } * dir;
            let full = magnus_step(x, hs, &pot, self.z);
            let first = magnus_step(x, 0.5 * hs, &pot, self.z);
            let second = magnus_step(x + 0.5 * hs, 0.5 * hs, &pot, self.z);
            let half = second.mul(&first);
            let err = full.sub(&half).max_abs() / (self.cfg.rtol * half.max_abs() + self.cfg.atol);
            if !half.is_finite() {
                return Err(SolverError::NonFinite { x });
            }
            let factor = if err == 0.0 { 4.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 4.0) };
            if err <= 1.0 {
                let to = if last { q } else { x + hs };
                emit(Event::Flow { from: x, to, v_from: pot(x), v_to: pot(to), m: half });
                x = to;
                h = (hs.abs() * factor).min(self.cfg.max_step);
                self.h_try = h;
            } else {
                h = hs.abs() * factor;
                if h < self.cfg.min_step * (1.0 + x.abs()) {
                    return Err(SolverError::StepUnderflow { x, h });
                }
            }
        }
        Ok(())
    }
}

/// Transfer matrix from `x0` to `x1`; columns are the solutions with initial
/// data `(1, 0)` and `(0, 1)` at `x0`.
pub fn transfer_matrix(
    mu: &SignedMeasure,
    z: C64,
    x0: f64,
    x1: f64,
    cfg: &SolverConfig,
) -> Result<TransferMatrix, SolverError> {
    let mut acc = Mat2::identity();
    Walker::new(mu, z, *cfg).walk(x0, x1, |ev| {
        let m = match ev {
            Event::Flow { m, .. } | Event::Jump { m, .. } => m,
        };
        acc = m.mul(&acc);
    })?;
    Ok(TransferMatrix { matrix: acc, z, x0, x1 })
}

/// Transfer matrix as `exp(log_scale) · matrix` with `matrix` renormalized,
/// for paths along which the entries would overflow.
pub fn transfer_matrix_scaled(
    mu: &SignedMeasure,
    z: C64,
    x0: f64,
    x1: f64,
    cfg: &SolverConfig,
) -> Result<(Mat2, f64), SolverError> {
    let mut acc = Mat2::identity();
    let mut log_scale = 0.0;
    Walker::new(mu, z, *cfg).walk(x0, x1, |ev| {
        let m = match ev {
            Event::Flow { m, .. } | Event::Jump { m, .. } => m,
        };
        acc = m.mul(&acc);
        let s = acc.max_abs();
        if s > 1e100 {
            acc = acc.scale(1.0 / s);
            log_scale += s.ln();
        }
    })?;
    Ok((acc, log_scale))
}

/// Propagates `(f, f')` from `x0` to `x1`, returning the normalized final
/// vector and the log of the accumulated growth.
pub fn propagate_normalized(
    mu: &SignedMeasure,
    z: C64,
    x0: f64,
    x1: f64,
    init: (C64, C64),
    cfg: &SolverConfig,
) -> Result<((C64, C64), f64), SolverError> {
    let mut v = init;
    let mut log_scale = 0.0;
    Walker::new(mu, z, *cfg).walk(x0, x1, |ev| {
        let m = match ev {
            Event::Flow { m, .. } | Event::Jump { m, .. } => m,
        };
        v = m.apply(v);
        let s = v.0.norm().max(v.1.norm());
        if s > 1e50 || (s < 1e-50 && s > 0.0) {
            v = (v.0 / s, v.1 / s);
            log_scale += s.ln();
        }
    })?;
    Ok((v, log_scale))
}

/// Initial condition at `x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialData {
    /// `(f(x0), f'(x0))`.
    Classical { f: C64, df: C64 },
    /// `(f(x0), (Af)(x0))` with the quasi-derivative
    /// `Af(x) = f'(x) - ∫_{[0,x]} f dμ` (for `x < 0`, `+∫_{(x,0)} f dμ`).
    Quasi { f: C64, af: C64 },
}

/// Solution value and derivatives at a point that is not an atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionState {
    pub x: f64,
    pub f: C64,
    pub df: C64,
    /// Quasi-derivative anchored at 0.
    pub af: C64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub x: f64,
    pub f: C64,
    pub df: C64,
}

/// A recorded stretch of the trajectory with no atoms inside.
#[derive(Debug, Clone, Copy)]
struct Piece {
    xa: f64,
    fa: C64,
    da: C64,
    xb: f64,
    fb: C64,
    db: C64,
    va: f64,
    vb: f64,
}

impl Piece {
    /// `∫ f V dx` over the piece: cubic Hermite interpolant times the linear
    /// potential, integrated with 3-point Gauss–Legendre (exact for degree 5).
    fn density_integral(&self) -> C64 {
        let h = self.xb - self.xa;
        let nodes = [
            (0.5 - 0.387_298_334_620_741_7, 5.0 / 18.0),
            (0.5, 8.0 / 18.0),
            (0.5 + 0.387_298_334_620_741_7, 5.0 / 18.0),
        ];
        let mut total = C64::new(0.0, 0.0);
        for (s, w) in nodes {
            let h00 = 2.0 * s * s * s - 3.0 * s * s + 1.0;
            let h10 = s * s * s - 2.0 * s * s + s;
            let h01 = -2.0 * s * s * s + 3.0 * s * s;
            let h11 = s * s * s - s * s;
            let f = self.fa * h00 + self.da * (h10 * h) + self.fb * h01 + self.db * (h11 * h);
            let v = self.va + (self.vb - self.va) * s;
            total += f * (v * w);
        }
        total * h
    }
}

struct Trajectory {
    pieces: Vec<Piece>,
    jumps: Vec<(f64, C64)>, // (position, f at atom)
    end: (C64, C64),
}

fn integrate_path(
    mu: &SignedMeasure,
    z: C64,
    x0: f64,
    x1: f64,
    init: (C64, C64),
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    let mut v = init;
    let mut pieces = Vec::new();
    let mut jumps = Vec::new();
    let mut bad = None;
    let mut walker = Walker::new(mu, z, *cfg);
    walker.endpoint_atoms_allowed = true;
    walker.walk(x0, x1, |ev| match ev {
        Event::Flow { from, to, v_from, v_to, m } => {
            let next = m.apply(v);
            if bad.is_none() && !(next.0.norm().is_finite() && next.1.norm().is_finite()) {
                bad = Some(to);
            }
            let (xa, fa, da, xb, fb, db, va, vb) = if to > from {
                (from, v.0, v.1, to, next.0, next.1, v_from, v_to)
            } else {
                (to, next.0, next.1, from, v.0, v.1, v_to, v_from)
            };
            pieces.push(Piece { xa, fa, da, xb, fb, db, va, vb });
            v = next;
        }
        Event::Jump { at, m } => {
            jumps.push((at, v.0));
            v = m.apply(v);
        }
    })?;
    if let Some(x) = bad {
        return Err(SolverError::NonFinite { x });
    }
    Ok(Trajectory { pieces, jumps, end: v })
}

/// `∫_{[0,x]} f dμ` (or `-∫_{(x,0)} f dμ` for `x < 0`) from a trajectory
/// that covers the interval between 0 and `x`.
fn mass_integral(mu: &SignedMeasure, traj: &Trajectory, x: f64, f_at_zero: C64) -> C64 {
    let (lo, hi) = if x >= 0.0 { (0.0, x) } else { (x, 0.0) };
    let mut total = C64::new(0.0, 0.0);
    for p in &traj.pieces {
        let a = p.xa.max(lo);
        let b = p.xb.min(hi);
        if b <= a {
            continue;
        }
        // paths are split at 0, so pieces never straddle the boundary
        total += p.density_integral();
    }
    for &(pos, f) in &traj.jumps {
        let inside = if x >= 0.0 { pos > 0.0 && pos <= x } else { pos > x && pos < 0.0 };
        if inside {
            total += f * mu.atom_at(pos);
        }
    }
    // atom at 0 counts for the closed interval [0, x]
    if x >= 0.0 {
        total += f_at_zero * mu.atom_at(0.0);
    }
    if x >= 0.0 {
        total
    } else {
        -total
    }
}

/// Runs the solution from `x0` through 0 to `x1` and returns the state at
/// `x1` together with `Af(x0)`. An atom at 0 is applied only when the path
/// crosses 0.
fn solve_with_quasi(
    mu: &SignedMeasure,
    z: C64,
    x0: f64,
    init: (C64, C64),
    x1: f64,
    cfg: &SolverConfig,
) -> Result<(SolutionState, C64), SolverError> {
    let alpha0 = mu.atom_at(0.0);
    let traj_a = if x0 == 0.0 {
        None
    } else {
        Some(integrate_path(mu, z, x0, 0.0, init, cfg)?)
    };
    let mut at_zero = traj_a.as_ref().map(|t| t.end).unwrap_or(init);
    let f_zero = at_zero.0;
    if x0 != 0.0 && x1 != 0.0 && (x0 < 0.0) != (x1 < 0.0) {
        let jump = if x0 < 0.0 { alpha0 } else { -alpha0 };
        at_zero.1 += jump * at_zero.0;
    }
    let traj_b = if x1 == 0.0 {
        None
    } else {
        Some(integrate_path(mu, z, 0.0, x1, at_zero, cfg)?)
    };
    let end = traj_b.as_ref().map(|t| t.end).unwrap_or(at_zero);
    let af1 = match &traj_b {
        Some(t) => end.1 - mass_integral(mu, t, x1, f_zero),
        None => end.1,
    };
    let af0 = match &traj_a {
        Some(t) => init.1 - mass_integral(mu, t, x0, f_zero),
        None => init.1,
    };
    Ok((SolutionState { x: x1, f: end.0, df: end.1, af: af1 }, af0))
}

/// Solves the initial value problem from `x0` to `x1`.
pub fn solve_ivp(
    mu: &SignedMeasure,
    z: C64,
    x0: f64,
    init: InitialData,
    x1: f64,
    cfg: &SolverConfig,
) -> Result<SolutionState, SolverError> {
    for &x in &[x0, x1] {
        let w = mu.atom_at(x);
        if w != 0.0 {
            return Err(SolverError::AtomAtEndpoint { position: x, weight: w });
        }
    }
    let classical = match init {
        InitialData::Classical { f, df } => (f, df),
        InitialData::Quasi { f, af } => {
            // Af(x0) = df - (i_f f + i_d df) where (i_f, i_d) are the mass
            // integrals of the two basis solutions.
            let one = C64::new(1.0, 0.0);
            let zero = C64::new(0.0, 0.0);
            let (_, af_f) = solve_with_quasi(mu, z, x0, (one, zero), x0, cfg)?;
            let (_, af_d) = solve_with_quasi(mu, z, x0, (zero, one), x0, cfg)?;
            let i_f = -af_f;
            let i_d = one - af_d;
            let denom = one - i_d;
            if denom.norm() < 1e-12 {
                return Err(SolverError::DegenerateQuasiInit { x0 });
            }
            (f, (af + i_f * f) / denom)
        }
    };
    if classical.0.norm() == 0.0 && classical.1.norm() == 0.0 {
        return Err(SolverError::ZeroInitialData);
    }
    let (state, _) = solve_with_quasi(mu, z, x0, classical, x1, cfg)?;
    Ok(state)
}

/// Solution samples at every accepted integrator step from `x0` to `x1`.
pub fn solve_trace(
    mu: &SignedMeasure,
    z: C64,
    x0: f64,
    init: (C64, C64),
    x1: f64,
    cfg: &SolverConfig,
) -> Result<Vec<TracePoint>, SolverError> {
    let mut out = vec![TracePoint { x: x0, f: init.0, df: init.1 }];
    let mut v = init;
    Walker::new(mu, z, *cfg).walk(x0, x1, |ev| match ev {
        Event::Flow { to, m, .. } => {
            v = m.apply(v);
            out.push(TracePoint { x: to, f: v.0, df: v.1 });
        }
        Event::Jump { m, .. } => v = m.apply(v),
    })?;
    Ok(out)
}

/// Writes a trace as CSV `(x, Re f, Im f, Re f', Im f')`.
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[TracePoint]) -> std::io::Result<()> {
    writeln!(w, "x,re_f,im_f,re_df,im_df")?;
    for p in trace {
        writeln!(w, "{},{},{},{},{}", p.x, p.f.re, p.f.im, p.df.re, p.df.im)?;
    }
    Ok(())
}

/// Half the trace of the monodromy over one period starting at `x0`.
pub fn discriminant(
    mu: &SignedMeasure,
    z: C64,
    x0: f64,
    period: f64,
    cfg: &SolverConfig,
) -> Result<C64, SolverError> {
    Ok(transfer_matrix(mu, z, x0, x0 + period, cfg)?.matrix.trace() * 0.5)
}
