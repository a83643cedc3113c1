//! Finite-data signed measures on the line: atoms plus a piecewise-linear
//! density, together with the shift and restriction maps, exact test-function
//! pairings, membership in the classes `V^C`, and the weak-* metric built from
//! a fixed enumeration of dyadic tents.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of the basis enumeration used by [`MetricConfig`]. Persisted
/// artifacts carry it so that distances are never compared across conventions.
pub const METRIC_CONVENTION: &str = "dyadic-tent-v1";

/// Default number of basis terms kept in the metric sum.
pub const DEFAULT_METRIC_TERMS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("atom positions must be strictly increasing (index {0})")]
    AtomOrder(usize),
    #[error("density breaks must be non-decreasing (index {0})")]
    BreakOrder(usize),
    #[error("density break {0} repeated more than twice")]
    BreakMultiplicity(f64),
    #[error("density has {breaks} breaks but {values} values")]
    LengthMismatch { breaks: usize, values: usize },
    #[error("a nonempty density needs at least two breaks")]
    ShortDensity,
    #[error("invalid interval ({0}, {1})")]
    BadInterval(f64, f64),
    #[error("class bound must be positive, got {0}")]
    BadClassBound(f64),
    #[error("invalid test function: {0}")]
    BadTestFunction(&'static str),
}

/// Piecewise-linear density, zero outside `[breaks[0], breaks[last]]`.
///
/// A break listed twice encodes a jump: the first copy carries the left
/// limit and the second the right limit.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Density {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

/// One linear piece of a density, `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
}

impl Segment {
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        let s = (x - self.lo) / (self.hi - self.lo);
        self.v_lo + s * (self.v_hi - self.v_lo)
    }

    pub fn is_constant(&self) -> bool {
        self.v_lo == self.v_hi
    }
}

impl Density {
    fn validate(&self) -> Result<(), MeasureError> {
        if self.breaks.len() != self.values.len() {
            return Err(MeasureError::LengthMismatch {
                breaks: self.breaks.len(),
                values: self.values.len(),
            });
        }
        if self.breaks.len() == 1 {
            return Err(MeasureError::ShortDensity);
        }
        if self.breaks.iter().chain(&self.values).any(|v| !v.is_finite()) {
            return Err(MeasureError::NonFinite("density"));
        }
        for i in 1..self.breaks.len() {
            if self.breaks[i] < self.breaks[i - 1] {
                return Err(MeasureError::BreakOrder(i));
            }
            if i >= 2 && self.breaks[i] == self.breaks[i - 2] {
                return Err(MeasureError::BreakMultiplicity(self.breaks[i]));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.breaks.is_empty()
    }

    /// Nondegenerate linear pieces in increasing order.
    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.breaks
            .windows(2)
            .zip(self.values.windows(2))
            .filter(|(b, _)| b[1] > b[0])
            .map(|(b, v)| Segment {
                lo: b[0],
                hi: b[1],
                v_lo: v[0],
                v_hi: v[1],
            })
    }

    /// Left and right limits of the density at `x`.
    pub fn limits(&self, x: f64) -> (f64, f64) {
        if self.breaks.is_empty() {
            return (0.0, 0.0);
        }
        let first = self.breaks[0];
        let last = *self.breaks.last().unwrap();
        if x < first || x > last {
            return (0.0, 0.0);
        }
        // index of first break >= x and first break > x
        let ge = self.breaks.partition_point(|&b| b < x);
        let gt = self.breaks.partition_point(|&b| b <= x);
        if ge < gt {
            // x is a break (possibly doubled)
            let left = if ge == 0 { 0.0 } else { self.values[ge] };
            let right = if gt == self.breaks.len() {
                0.0
            } else {
                self.values[gt - 1]
            };
            return (left, right);
        }
        // strictly inside segment [ge-1, ge]
        let seg = Segment {
            lo: self.breaks[ge - 1],
            hi: self.breaks[ge],
            v_lo: self.values[ge - 1],
            v_hi: self.values[ge],
        };
        let v = seg.value(x);
        (v, v)
    }

    /// Value away from breaks; at a jump the right limit.
    pub fn value(&self, x: f64) -> f64 {
        self.limits(x).1
    }

    /// Index range of segments (as break indices `i` with piece `[i, i+1]`)
    /// that may intersect `[lo, hi]`.
    fn piece_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        if self.breaks.len() < 2 {
            return 0..0;
        }
        let start = self.breaks.partition_point(|&b| b <= lo).saturating_sub(1);
        let end = self.breaks.partition_point(|&b| b < hi).min(self.breaks.len() - 1);
        start..end.max(start)
    }

    /// Builds a canonical density from breakpoints with explicit one-sided
    /// limits. Points must be strictly increasing.
    fn from_limits(points: &[(f64, f64, f64)]) -> Density {
        let mut breaks = Vec::with_capacity(points.len() + 2);
        let mut values = Vec::with_capacity(points.len() + 2);
        for &(x, left, right) in points {
            if left == right {
                breaks.push(x);
                values.push(left);
            } else {
                breaks.push(x);
                values.push(left);
                breaks.push(x);
                values.push(right);
            }
        }
        // the implicit zero outside makes leading/trailing zero copies redundant
        let mut d = Density { breaks, values };
        d.trim();
        d
    }

    fn trim(&mut self) {
        // drop leading zero pieces
        let mut start = 0;
        while start + 1 < self.breaks.len() && self.values[start] == 0.0 && self.values[start + 1] == 0.0
        {
            start += 1;
        }
        if start + 1 < self.breaks.len() && self.values[start] == 0.0 && self.breaks[start] == self.breaks[start + 1] {
            start += 1;
        }
        let mut end = self.breaks.len();
        while end >= start + 2 && self.values[end - 1] == 0.0 && self.values[end - 2] == 0.0 {
            end -= 1;
        }
        if end >= start + 2 && self.values[end - 1] == 0.0 && self.breaks[end - 1] == self.breaks[end - 2] {
            end -= 1;
        }
        if end < start + 2 {
            self.breaks.clear();
            self.values.clear();
            return;
        }
        self.breaks = self.breaks[start..end].to_vec();
        self.values = self.values[start..end].to_vec();
    }
}

/// A signed Borel measure described by finitely many atoms and a
/// piecewise-linear density.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawMeasure", into = "RawMeasure")]
pub struct SignedMeasure {
    atoms: Vec<(f64, f64)>,
    density: Density,
}

#[derive(Serialize, Deserialize)]
struct RawMeasure {
    #[serde(default)]
    atoms: Vec<(f64, f64)>,
    #[serde(default)]
    density: Density,
}

impl TryFrom<RawMeasure> for SignedMeasure {
    type Error = MeasureError;
    fn try_from(raw: RawMeasure) -> Result<Self, Self::Error> {
        SignedMeasure::new(raw.atoms, raw.density.breaks, raw.density.values)
    }
}

impl From<SignedMeasure> for RawMeasure {
    fn from(m: SignedMeasure) -> Self {
        RawMeasure {
            atoms: m.atoms,
            density: m.density,
        }
    }
}

impl SignedMeasure {
    pub fn new(
        atoms: Vec<(f64, f64)>,
        breaks: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, MeasureError> {
        for (i, w) in atoms.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(MeasureError::AtomOrder(i + 1));
            }
        }
        if atoms.iter().any(|(p, w)| !p.is_finite() || !w.is_finite()) {
            return Err(MeasureError::NonFinite("atoms"));
        }
        let density = Density { breaks, values };
        density.validate()?;
        Ok(SignedMeasure { atoms, density })
    }

    pub fn zero() -> Self {
        SignedMeasure::default()
    }

    /// Sum of point masses; atoms at equal positions are merged.
    pub fn from_atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, MeasureError> {
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let atoms = merge_atoms(atoms);
        SignedMeasure::new(atoms, vec![], vec![])
    }

    pub fn dirac(position: f64, weight: f64) -> Self {
        SignedMeasure {
            atoms: vec![(position, weight)],
            density: Density::default(),
        }
    }

    /// Density `value` on `(lo, hi)`.
    pub fn constant_density(lo: f64, hi: f64, value: f64) -> Result<Self, MeasureError> {
        if !(lo < hi) {
            return Err(MeasureError::BadInterval(lo, hi));
        }
        SignedMeasure::new(vec![], vec![lo, hi], vec![value, value])
    }

    /// Piecewise-linear interpolant of `f` on `n` equal cells of `[lo, hi]`.
    pub fn from_density_fn(
        f: impl Fn(f64) -> f64,
        lo: f64,
        hi: f64,
        n: usize,
    ) -> Result<Self, MeasureError> {
        if !(lo < hi) || n == 0 {
            return Err(MeasureError::BadInterval(lo, hi));
        }
        let h = (hi - lo) / n as f64;
        let breaks: Vec<f64> = (0..=n)
            .map(|i| if i == n { hi } else { lo + i as f64 * h })
            .collect();
        let values = breaks.iter().map(|&x| f(x)).collect();
        SignedMeasure::new(vec![], breaks, values)
    }

    pub fn with_atoms(mut self, extra: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut atoms: Vec<(f64, f64)> = self.atoms.into_iter().chain(extra).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.atoms = merge_atoms(atoms);
        self
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn density(&self) -> &Density {
        &self.density
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.1 == 0.0) && self.density.values.iter().all(|&v| v == 0.0)
    }

    /// Smallest closed interval carrying the measure, `None` for the zero
    /// measure.
    pub fn support(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(p, w) in &self.atoms {
            if w != 0.0 {
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        for s in self.density.segments() {
            if s.v_lo != 0.0 || s.v_hi != 0.0 {
                lo = lo.min(s.lo);
                hi = hi.max(s.hi);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Weight of the atom located exactly at `x`.
    pub fn atom_at(&self, x: f64) -> f64 {
        match self.atoms.binary_search_by(|a| a.0.total_cmp(&x)) {
            Ok(i) => self.atoms[i].1,
            Err(_) => 0.0,
        }
    }

    /// Atoms with position in the closed interval `[lo, hi]`.
    pub fn atoms_in(&self, lo: f64, hi: f64) -> &[(f64, f64)] {
        let a = self.atoms.partition_point(|p| p.0 < lo);
        let b = self.atoms.partition_point(|p| p.0 <= hi);
        &self.atoms[a..b.max(a)]
    }

    /// Exact `∫ f dμ`.
    pub fn test_integral(&self, f: &TestFunction) -> f64 {
        let knots = f.knots();
        let (lo, hi) = (knots[0].0, knots[knots.len() - 1].0);
        let mut total: f64 = self.atoms_in(lo, hi).iter().map(|&(p, w)| w * f.eval(p)).sum();
        let d = &self.density;
        for i in d.piece_range(lo, hi) {
            let (a, b) = (d.breaks[i], d.breaks[i + 1]);
            if b <= a {
                continue;
            }
            let seg = Segment {
                lo: a,
                hi: b,
                v_lo: d.values[i],
                v_hi: d.values[i + 1],
            };
            total += integrate_linear_product(&seg, &knots);
        }
        total
    }

    /// `S_x μ`: moves mass at `p` to `p - x`.
    pub fn shift(&self, x: f64) -> SignedMeasure {
        if x == 0.0 {
            return self.clone();
        }
        SignedMeasure {
            atoms: self.atoms.iter().map(|&(p, w)| (p - x, w)).collect(),
            density: Density {
                breaks: self.density.breaks.iter().map(|b| b - x).collect(),
                values: self.density.values.clone(),
            },
        }
    }

    /// Restriction to the open interval `(lo, hi)`; infinite endpoints allowed.
    pub fn restrict(&self, lo: f64, hi: f64) -> SignedMeasure {
        debug_assert!(lo < hi);
        let atoms = self
            .atoms
            .iter()
            .copied()
            .filter(|&(p, _)| p > lo && p < hi)
            .collect();
        let d = &self.density;
        if d.is_empty() {
            return SignedMeasure {
                atoms,
                density: Density::default(),
            };
        }
        let first = d.breaks[0];
        let last = *d.breaks.last().unwrap();
        if hi <= first || lo >= last {
            return SignedMeasure {
                atoms,
                density: Density::default(),
            };
        }
        let mut breaks = Vec::new();
        let mut values = Vec::new();
        if lo > first {
            breaks.push(lo);
            values.push(d.limits(lo).1);
        }
        for (&b, &v) in d.breaks.iter().zip(&d.values) {
            let inside = (b > lo || (lo <= first && b == first)) && (b < hi || (hi >= last && b == last));
            if inside {
                breaks.push(b);
                values.push(v);
            }
        }
        if hi < last {
            breaks.push(hi);
            values.push(d.limits(hi).0);
        }
        let mut density = Density { breaks, values };
        density.trim();
        SignedMeasure { atoms, density }
    }

    /// `Σ c_k μ_k`. Atoms at distinct positions stay distinct; densities are
    /// combined pointwise on the union of breaks.
    pub fn linear_combination(terms: &[(f64, &SignedMeasure)]) -> SignedMeasure {
        let mut atoms: Vec<(f64, f64)> = terms
            .iter()
            .flat_map(|(c, m)| m.atoms.iter().map(move |&(p, w)| (p, c * w)))
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let atoms = merge_atoms(atoms);

        let mut points: Vec<f64> = terms
            .iter()
            .filter(|(c, _)| *c != 0.0)
            .flat_map(|(_, m)| m.density.breaks.iter().copied())
            .collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        let limits: Vec<(f64, f64, f64)> = points
            .iter()
            .map(|&x| {
                let (mut l, mut r) = (0.0, 0.0);
                for (c, m) in terms {
                    if *c == 0.0 {
                        continue;
                    }
                    let (ml, mr) = m.density.limits(x);
                    l += c * ml;
                    r += c * mr;
                }
                (x, l, r)
            })
            .collect();
        SignedMeasure {
            atoms,
            density: Density::from_limits(&limits),
        }
    }

    pub fn scale(&self, c: f64) -> SignedMeasure {
        SignedMeasure::linear_combination(&[(c, self)])
    }

    pub fn add(&self, other: &SignedMeasure) -> SignedMeasure {
        SignedMeasure::linear_combination(&[(1.0, self), (1.0, other)])
    }

    /// Maximal density magnitude on `[lo, hi]` (atoms ignored).
    pub fn density_sup(&self, lo: f64, hi: f64) -> f64 {
        let d = &self.density;
        let mut best = 0.0f64;
        for i in d.piece_range(lo, hi) {
            let (a, b) = (d.breaks[i], d.breaks[i + 1]);
            if b <= a || b < lo || a > hi {
                continue;
            }
            let seg = Segment {
                lo: a,
                hi: b,
                v_lo: d.values[i],
                v_hi: d.values[i + 1],
            };
            let x0 = a.max(lo);
            let x1 = b.min(hi);
            best = best.max(seg.value(x0).abs()).max(seg.value(x1).abs());
        }
        best
    }

    /// Total variation `|μ|([lo, hi])` of a closed interval.
    pub fn total_variation(&self, lo: f64, hi: f64) -> f64 {
        let atoms: f64 = self.atoms_in(lo, hi).iter().map(|a| a.1.abs()).sum();
        let d = &self.density;
        let mut dens = 0.0;
        for i in d.piece_range(lo, hi) {
            let (a, b) = (d.breaks[i], d.breaks[i + 1]);
            if b <= a {
                continue;
            }
            let seg = Segment {
                lo: a,
                hi: b,
                v_lo: d.values[i],
                v_hi: d.values[i + 1],
            };
            let x0 = a.max(lo);
            let x1 = b.min(hi);
            if x1 > x0 {
                dens += abs_linear_integral(seg.value(x0), seg.value(x1), x1 - x0);
            }
        }
        atoms + dens
    }

    /// Checks `|μ|(I) ≤ C max{|I|, 1}` over all intervals.
    pub fn vc_membership(&self, bound: ClassBound) -> VcReport {
        vc_check(self, bound.value())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measure serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

fn merge_atoms(sorted: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (p, w) in sorted {
        match out.last_mut() {
            Some(last) if last.0 == p => last.1 += w,
            _ => out.push((p, w)),
        }
    }
    out
}

/// `∫_a^b |v(x)| dx` for `v` linear from `v0` to `v1` on an interval of
/// length `len`.
fn abs_linear_integral(v0: f64, v1: f64, len: f64) -> f64 {
    if v0 * v1 >= 0.0 {
        0.5 * (v0.abs() + v1.abs()) * len
    } else {
        let t = v0.abs() / (v0.abs() + v1.abs());
        0.5 * len * (t * v0.abs() + (1.0 - t) * v1.abs())
    }
}

/// `∫ seg(x) f(x) dx` where `f` is the piecewise-linear function through
/// `knots` (zero outside). Each sub-piece is a quadratic, so Simpson's rule is
/// exact.
fn integrate_linear_product(seg: &Segment, knots: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for w in knots.windows(2) {
        let ((x0, f0), (x1, f1)) = (w[0], w[1]);
        let a = x0.max(seg.lo);
        let b = x1.min(seg.hi);
        if b <= a {
            continue;
        }
        let fl = |x: f64| f0 + (f1 - f0) * (x - x0) / (x1 - x0);
        let m = 0.5 * (a + b);
        total += (b - a) / 6.0
            * (seg.value(a) * fl(a) + 4.0 * seg.value(m) * fl(m) + seg.value(b) * fl(b));
    }
    total
}

/// The constant `C` of `V^C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ClassBound(f64);

impl ClassBound {
    pub fn new(c: f64) -> Result<Self, MeasureError> {
        if c > 0.0 && c.is_finite() {
            Ok(ClassBound(c))
        } else {
            Err(MeasureError::BadClassBound(c))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for ClassBound {
    type Error = MeasureError;
    fn try_from(c: f64) -> Result<Self, Self::Error> {
        ClassBound::new(c)
    }
}

impl From<ClassBound> for f64 {
    fn from(c: ClassBound) -> f64 {
        c.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcReport {
    pub member: bool,
    /// `max_I |μ|(I) − C max{|I|,1}`; nonpositive for members.
    pub excess: f64,
    /// Interval attaining `excess` (closed).
    pub worst: Option<(f64, f64)>,
}

fn vc_check(mu: &SignedMeasure, c: f64) -> VcReport {
    // Absolute-value pieces: |V| is linear between breaks and zero crossings.
    let mut pieces: Vec<Segment> = Vec::new();
    for s in mu.density.segments() {
        if s.v_lo * s.v_hi < 0.0 {
            let r = s.lo + (s.hi - s.lo) * s.v_lo.abs() / (s.v_lo.abs() + s.v_hi.abs());
            pieces.push(Segment { lo: s.lo, hi: r, v_lo: s.v_lo.abs(), v_hi: 0.0 });
            pieces.push(Segment { lo: r, hi: s.hi, v_lo: 0.0, v_hi: s.v_hi.abs() });
        } else {
            pieces.push(Segment {
                lo: s.lo,
                hi: s.hi,
                v_lo: s.v_lo.abs(),
                v_hi: s.v_hi.abs(),
            });
        }
    }
    let atoms: Vec<(f64, f64)> = mu
        .atoms
        .iter()
        .filter(|a| a.1 != 0.0)
        .map(|&(p, w)| (p, w.abs()))
        .collect();
    if pieces.is_empty() && atoms.is_empty() {
        return VcReport { member: true, excess: -c, worst: None };
    }

    let mut prefix = Vec::with_capacity(pieces.len() + 1);
    prefix.push(0.0);
    for p in &pieces {
        let last = *prefix.last().unwrap();
        prefix.push(last + 0.5 * (p.v_lo + p.v_hi) * (p.hi - p.lo));
    }
    let mut atom_prefix = Vec::with_capacity(atoms.len() + 1);
    atom_prefix.push(0.0);
    for a in &atoms {
        let last = *atom_prefix.last().unwrap();
        atom_prefix.push(last + a.1);
    }
    // continuous part of |μ|((-∞, x])
    let cont = |x: f64| -> f64 {
        let i = pieces.partition_point(|p| p.hi <= x);
        if i == pieces.len() {
            return prefix[i];
        }
        let p = &pieces[i];
        if x <= p.lo {
            return prefix[i];
        }
        let vx = p.value(x);
        prefix[i] + 0.5 * (p.v_lo + vx) * (x - p.lo)
    };
    let atoms_le = |x: f64| atom_prefix[atoms.partition_point(|a| a.0 <= x)];
    let atoms_lt = |x: f64| atom_prefix[atoms.partition_point(|a| a.0 < x)];
    let g_plus = |x: f64| cont(x) + atoms_le(x);
    let g_minus = |x: f64| cont(x) + atoms_lt(x);

    let mut base: Vec<f64> = Vec::new();
    for p in &pieces {
        base.push(p.lo);
        base.push(p.hi);
        // where |V| crosses C the cumulative excess changes monotonicity
        if (p.v_lo - c) * (p.v_hi - c) < 0.0 {
            base.push(p.lo + (p.hi - p.lo) * (c - p.v_lo) / (p.v_hi - p.v_lo));
        }
    }
    base.extend(atoms.iter().map(|a| a.0));

    let mut best = f64::NEG_INFINITY;
    let mut worst = (0.0, 0.0);

    // Intervals of length >= 1 with both ends free.
    let mut cands: Vec<f64> = base
        .iter()
        .flat_map(|&x| [x - 1.0, x, x + 1.0])
        .collect();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    let mut j = 0;
    let mut min_h2 = f64::INFINITY;
    let mut arg_a = 0.0;
    for &b in &cands {
        while j < cands.len() && cands[j] <= b - 1.0 {
            let a = cands[j];
            let h2 = g_minus(a) - c * a;
            if h2 < min_h2 {
                min_h2 = h2;
                arg_a = a;
            }
            j += 1;
        }
        if min_h2.is_finite() {
            let val = g_plus(b) - c * b - min_h2;
            if val > best {
                best = val;
                worst = (arg_a, b);
            }
        }
    }

    // Unit windows [a, a+1]; the excess is piecewise quadratic in a.
    let mut q: Vec<f64> = base.iter().flat_map(|&x| [x - 1.0, x]).collect();
    q.sort_by(f64::total_cmp);
    q.dedup();
    let window = |a: f64| g_plus(a + 1.0) - g_minus(a) - c;
    for &a in &q {
        let v = window(a);
        if v > best {
            best = v;
            worst = (a, a + 1.0);
        }
    }
    for w in q.windows(2) {
        let (a0, a1) = (w[0], w[1]);
        let m = 0.5 * (a0 + a1);
        let atoms_inside = atoms_le(m + 1.0) - atoms_lt(m);
        let f = |a: f64| cont(a + 1.0) - cont(a) + atoms_inside - c;
        let (f0, fm, f1) = (f(a0), f(m), f(a1));
        let h = 0.5 * (a1 - a0);
        let curv = f0 - 2.0 * fm + f1;
        if curv < 0.0 {
            let s = 0.5 * (f0 - f1) / curv; // vertex offset from m in units of h
            if s.abs() < 1.0 {
                let a = m + s * h;
                let v = f(a);
                if v > best {
                    best = v;
                    worst = (a, a + 1.0);
                }
            }
        }
    }

    let tol = 1e-12 * c.max(1.0);
    VcReport {
        member: best <= tol,
        excess: best,
        worst: Some(worst),
    }
}

/// Continuous, compactly supported, piecewise-linear test functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Tent {
        center: f64,
        half_width: f64,
        height: f64,
    },
    /// Plateau of `height` on `[lo, hi]` with linear ramps of width `ramp`.
    Trapezoid {
        lo: f64,
        hi: f64,
        ramp: f64,
        height: f64,
    },
}

impl TestFunction {
    pub fn tent(center: f64, half_width: f64, height: f64) -> Result<Self, MeasureError> {
        if !(half_width > 0.0) || !center.is_finite() || !height.is_finite() {
            return Err(MeasureError::BadTestFunction("tent needs positive half-width"));
        }
        Ok(TestFunction::Tent { center, half_width, height })
    }

    pub fn trapezoid(lo: f64, hi: f64, ramp: f64, height: f64) -> Result<Self, MeasureError> {
        if !(lo <= hi) || !(ramp > 0.0) || !height.is_finite() {
            return Err(MeasureError::BadTestFunction("trapezoid needs lo <= hi and ramp > 0"));
        }
        Ok(TestFunction::Trapezoid { lo, hi, ramp, height })
    }

    /// Knots `(x, f(x))`; the function is linear between knots and zero
    /// outside the first and last.
    pub fn knots(&self) -> Vec<(f64, f64)> {
        match *self {
            TestFunction::Tent { center, half_width, height } => vec![
                (center - half_width, 0.0),
                (center, height),
                (center + half_width, 0.0),
            ],
            TestFunction::Trapezoid { lo, hi, ramp, height } => {
                if lo == hi {
                    vec![(lo - ramp, 0.0), (lo, height), (hi + ramp, 0.0)]
                } else {
                    vec![(lo - ramp, 0.0), (lo, height), (hi, height), (hi + ramp, 0.0)]
                }
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Tent { center, half_width, height } => {
                let r = (x - center).abs() / half_width;
                if r >= 1.0 {
                    0.0
                } else {
                    height * (1.0 - r)
                }
            }
            TestFunction::Trapezoid { lo, hi, ramp, height } => {
                if x >= lo && x <= hi {
                    height
                } else if x < lo {
                    height * (1.0 - (lo - x) / ramp).max(0.0)
                } else {
                    height * (1.0 - (x - hi) / ramp).max(0.0)
                }
            }
        }
    }

    /// Closed support `[lo, hi]`.
    pub fn support(&self) -> (f64, f64) {
        let k = self.knots();
        (k[0].0, k[k.len() - 1].0)
    }

    pub fn sup_norm(&self) -> f64 {
        match *self {
            TestFunction::Tent { height, .. } | TestFunction::Trapezoid { height, .. } => height.abs(),
        }
    }
}

/// Iterator over the dyadic tent basis in metric order.
///
/// Block `ℓ = 0, 1, 2, …` holds the tents of half-width `2^-j` and center in
/// `2^-j ℤ ∩ [-2^ℓ, 2^ℓ]` for `j ≤ ℓ` not listed in an earlier block; within
/// a block tents are ordered by scale (coarse first), then `|center|`, then
/// sign (positive first).
#[derive(Debug, Clone, Default)]
pub struct DyadicTents {
    block: u32,
    pending: std::vec::IntoIter<TestFunction>,
}

impl DyadicTents {
    pub fn new() -> Self {
        DyadicTents::default()
    }

    fn fill_block(block: u32) -> Vec<TestFunction> {
        let mut out = Vec::new();
        let radius = (1u64 << block) as f64;
        for j in 0..=block {
            let step = 1.0 / (1u64 << j) as f64;
            let kmax = (radius / step) as i64;
            let kmin = if j == block || block == 0 {
                0
            } else {
                // |c| > 2^(ℓ-1)
                ((radius * 0.5) / step) as i64 + 1
            };
            for k in kmin..=kmax {
                let signs: &[i64] = if k == 0 { &[1] } else { &[1, -1] };
                for &s in signs {
                    out.push(TestFunction::Tent {
                        center: (s * k) as f64 * step,
                        half_width: step,
                        height: 1.0,
                    });
                }
            }
        }
        out
    }
}

impl Iterator for DyadicTents {
    type Item = TestFunction;
    fn next(&mut self) -> Option<TestFunction> {
        loop {
            if let Some(t) = self.pending.next() {
                return Some(t);
            }
            if self.block > 40 {
                return None;
            }
            self.pending = DyadicTents::fill_block(self.block).into_iter();
            self.block += 1;
        }
    }
}

/// The `n`-th basis tent, `n ≥ 1`.
pub fn basis_function(n: usize) -> TestFunction {
    assert!(n >= 1, "basis index starts at 1");
    DyadicTents::new().nth(n - 1).expect("enumeration is infinite")
}

/// Truncated weak-* metric `Σ_{n≤N} 2^{-n} ρ_n/(1+ρ_n)`.
///
/// With `window = Some((lo, hi))` only tents supported in `[lo, hi]` are used
/// (renumbered in enumeration order), which gives the metric on `V^C_J`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "RawMetric", into = "RawMetric")]
pub struct MetricConfig {
    pub n_terms: usize,
    pub window: Option<(f64, f64)>,
    basis: Vec<TestFunction>,
}

#[derive(Serialize, Deserialize)]
struct RawMetric {
    convention: String,
    n_terms: usize,
    window: Option<(f64, f64)>,
}

impl From<RawMetric> for MetricConfig {
    fn from(raw: RawMetric) -> Self {
        match raw.window {
            None => MetricConfig::new(raw.n_terms),
            Some((lo, hi)) => MetricConfig::on_window(raw.n_terms, lo, hi),
        }
    }
}

impl From<MetricConfig> for RawMetric {
    fn from(m: MetricConfig) -> Self {
        RawMetric {
            convention: METRIC_CONVENTION.to_string(),
            n_terms: m.n_terms,
            window: m.window,
        }
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig::new(DEFAULT_METRIC_TERMS)
    }
}

impl MetricConfig {
    pub fn new(n_terms: usize) -> Self {
        let basis = DyadicTents::new().take(n_terms).collect();
        MetricConfig { n_terms, window: None, basis }
    }

    pub fn on_window(n_terms: usize, lo: f64, hi: f64) -> Self {
        let basis = DyadicTents::new()
            .filter(|t| {
                let (a, b) = t.support();
                a >= lo && b <= hi
            })
            .take(n_terms)
            .collect();
        MetricConfig {
            n_terms,
            window: Some((lo, hi)),
            basis,
        }
    }

    pub fn basis(&self) -> &[TestFunction] {
        &self.basis
    }

    /// Upper bound on the neglected tail `Σ_{n>N} 2^{-n}`.
    pub fn tail_bound(&self) -> f64 {
        0.5f64.powi(self.n_terms as i32)
    }

    pub fn embed(&self, mu: &SignedMeasure) -> Embedding {
        Embedding(self.basis.iter().map(|f| mu.test_integral(f)).collect())
    }

    pub fn distance_embedded(&self, a: &Embedding, b: &Embedding) -> f64 {
        weighted_sum(a.0.iter().zip(&b.0).map(|(x, y)| (x - y).abs()))
    }

    pub fn distance(&self, mu: &SignedMeasure, nu: &SignedMeasure) -> MetricValue {
        let diff = SignedMeasure::linear_combination(&[(1.0, mu), (-1.0, nu)]);
        let value = weighted_sum(self.basis.iter().map(|f| diff.test_integral(f).abs()));
        MetricValue {
            value,
            tail_bound: self.tail_bound(),
        }
    }

    /// `ρ_n(μ, ν)` for `n = 1..=N`.
    pub fn rho(&self, mu: &SignedMeasure, nu: &SignedMeasure) -> Vec<f64> {
        self.basis
            .iter()
            .map(|f| (mu.test_integral(f) - nu.test_integral(f)).abs())
            .collect()
    }
}

fn weighted_sum(rhos: impl Iterator<Item = f64>) -> f64 {
    let mut w = 1.0;
    let mut total = 0.0;
    for r in rhos {
        w *= 0.5;
        total += w * r / (1.0 + r);
    }
    total
}

/// Test-function pairings of a measure against the metric basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub Vec<f64>);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    pub value: f64,
    /// The full (untruncated) metric lies in `[value, value + tail_bound]`.
    pub tail_bound: f64,
}

pub fn metric_d(mu: &SignedMeasure, nu: &SignedMeasure, cfg: &MetricConfig) -> MetricValue {
    cfg.distance(mu, nu)
}
