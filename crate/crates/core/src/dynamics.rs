//! The shift flow `x ↦ S_x μ` seen through the weak-* metric: distance
//! traces, ω-limit estimates by metric clustering, reflectionless scans along
//! the orbit, and a decay check in the spirit of Denisov–Rakhmanov.
//!
//! Verdicts are reporting conventions on finite samples, not theorems.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::measures::{Embedding, MetricConfig, SignedMeasure};
use crate::reflectionless::{reflectionless_defect, BorelWindow, ReflectionlessError};
use crate::weyl::WeylConfig;

/// Default half-width of the ω-limit window.
pub const DEFAULT_WINDOW: f64 = 16.0;
/// Tail-mean threshold of [`denisov_rakhmanov_check`].
pub const DR_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("shift samples must be finite and strictly increasing (index {0})")]
    Samples(usize),
    #[error("no shift samples")]
    Empty,
    #[error("{count} clusters exceed the cap of {cap}")]
    TooManyClusters { count: usize, cap: usize },
    #[error("window half-width {0} must be positive")]
    Window(f64),
    #[error(transparent)]
    Reflectionless(#[from] ReflectionlessError),
}

fn check_samples(xs: &[f64]) -> Result<(), DynamicsError> {
    if xs.is_empty() {
        return Err(DynamicsError::Empty);
    }
    if let Some(i) = xs.iter().position(|x| !x.is_finite()) {
        return Err(DynamicsError::Samples(i));
    }
    if let Some(i) = xs.windows(2).position(|w| w[1] <= w[0]) {
        return Err(DynamicsError::Samples(i + 1));
    }
    Ok(())
}

/// `restrict(S_x μ, (-w, w))`, restricting before shifting.
pub fn windowed_shift(mu: &SignedMeasure, x: f64, w: f64) -> SignedMeasure {
    mu.restrict(x - w, x + w).shift(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTrace {
    pub x_samples: Vec<f64>,
    pub distances: Vec<f64>,
    pub reference: SignedMeasure,
    pub metric: MetricConfig,
}

impl ShiftTrace {
    pub fn is_decreasing(&self) -> bool {
        self.distances.windows(2).all(|w| w[1] < w[0])
    }

    /// Mean over the last quarter of the samples (at least one).
    pub fn tail_mean(&self) -> f64 {
        let n = self.distances.len();
        let k = (n / 4).max(1);
        self.distances[n - k..].iter().sum::<f64>() / k as f64
    }

    /// CSV `(x, distance)`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,distance")?;
        for (x, d) in self.x_samples.iter().zip(&self.distances) {
            writeln!(w, "{x},{d}")?;
        }
        Ok(())
    }
}

/// `d(S_x μ, reference)` along `xs`.
pub fn shift_trace(
    mu: &SignedMeasure,
    xs: &[f64],
    reference: &SignedMeasure,
    metric: &MetricConfig,
) -> Result<ShiftTrace, DynamicsError> {
    check_samples(xs)?;
    let r = metric.embed(reference);
    let reach = basis_reach(metric);
    let distances = xs
        .par_iter()
        .map(|&x| {
            let e = metric.embed(&mu.restrict(x - reach, x + reach).shift(x));
            metric.distance_embedded(&e, &r)
        })
        .collect();
    Ok(ShiftTrace {
        x_samples: xs.to_vec(),
        distances,
        reference: reference.clone(),
        metric: metric.clone(),
    })
}

/// Half-width of an interval holding every basis support, with margin.
fn basis_reach(metric: &MetricConfig) -> f64 {
    metric
        .basis()
        .iter()
        .map(|f| {
            let (a, b) = f.support();
            a.abs().max(b.abs())
        })
        .fold(0.0, f64::max)
        + 1.0
}

#[derive(Debug, Clone, PartialEq)]
pub struct OmegaEstimate {
    /// Windowed shifts chosen as cluster centers.
    pub representatives: Vec<SignedMeasure>,
    /// Shift at which each representative was sampled.
    pub representative_x: Vec<f64>,
    /// Cluster index of every sample.
    pub assignment: Vec<usize>,
    pub cluster_tol: f64,
    pub window: f64,
    embeddings: Vec<Embedding>,
}

impl OmegaEstimate {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn embeddings(&self) -> &[Embedding] {
        &self.embeddings
    }

    /// Representatives as a JSON array in the potential schema.
    pub fn representatives_json(&self) -> String {
        #[derive(Serialize)]
        struct Rep<'a> {
            x: f64,
            measure: &'a SignedMeasure,
        }
        let reps: Vec<Rep> = self
            .representative_x
            .iter()
            .zip(&self.representatives)
            .map(|(&x, measure)| Rep { x, measure })
            .collect();
        serde_json::to_string_pretty(&reps).expect("measures serialize")
    }
}

/// Hausdorff distance between two finite sets of embedded measures.
pub fn hausdorff(a: &[Embedding], b: &[Embedding], metric: &MetricConfig) -> f64 {
    let directed = |p: &[Embedding], q: &[Embedding]| {
        p.iter()
            .map(|x| {
                q.iter()
                    .map(|y| metric.distance_embedded(x, y))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Greedy farthest-point clustering of the windowed shifts
/// `restrict(S_x μ, (-W, W))`, seeded with the first sample.
pub fn omega_limit_estimate(
    mu: &SignedMeasure,
    xs: &[f64],
    window: f64,
    cluster_tol: f64,
    metric: &MetricConfig,
    max_clusters: usize,
) -> Result<OmegaEstimate, DynamicsError> {
    check_samples(xs)?;
    if !(window > 0.0) {
        return Err(DynamicsError::Window(window));
    }
    let samples: Vec<SignedMeasure> = xs.par_iter().map(|&x| windowed_shift(mu, x, window)).collect();
    let emb: Vec<Embedding> = samples.par_iter().map(|m| metric.embed(m)).collect();
    let mut centers = vec![0usize];
    let mut nearest: Vec<f64> = emb.iter().map(|e| metric.distance_embedded(e, &emb[0])).collect();
    let mut assignment = vec![0usize; xs.len()];
    loop {
        let (far, &gap) = nearest
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        if gap <= cluster_tol {
            break;
        }
        if centers.len() == max_clusters {
            return Err(DynamicsError::TooManyClusters { count: centers.len() + 1, cap: max_clusters });
        }
        let id = centers.len();
        centers.push(far);
        for (i, e) in emb.iter().enumerate() {
            let d = metric.distance_embedded(e, &emb[far]);
            if d < nearest[i] {
                nearest[i] = d;
                assignment[i] = id;
            }
        }
    }
    Ok(OmegaEstimate {
        representatives: centers.iter().map(|&i| samples[i].clone()).collect(),
        representative_x: centers.iter().map(|&i| xs[i]).collect(),
        embeddings: centers.iter().map(|&i| emb[i].clone()).collect(),
        assignment,
        cluster_tol,
        window,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub x: f64,
    pub max_defect: f64,
    pub mean_defect: f64,
    pub nonconverged: usize,
}

/// Reflectionless defect of the whole-line potential
/// `restrict(S_x μ, (-W, W))` at the window center, along `xs`.
pub fn omega_reflectionless_scan(
    mu: &SignedMeasure,
    energies: &BorelWindow,
    xs: &[f64],
    window: f64,
    y_schedule: &[f64],
    cfg: &WeylConfig,
) -> Result<Vec<ScanPoint>, DynamicsError> {
    check_samples(xs)?;
    if !(window > 0.0) {
        return Err(DynamicsError::Window(window));
    }
    xs.iter()
        .map(|&x| {
            let nu = windowed_shift(mu, x, window);
            let r = reflectionless_defect(&nu, 0.0, energies, y_schedule, cfg)?;
            Ok(ScanPoint {
                x,
                max_defect: r.max_defect,
                mean_defect: r.mean_defect,
                nonconverged: r.nonconverged,
            })
        })
        .collect()
}

/// CSV `(x, max_defect, mean_defect, nonconverged)`.
pub fn write_scan_csv<W: Write>(mut w: W, scan: &[ScanPoint]) -> std::io::Result<()> {
    writeln!(w, "x,max_defect,mean_defect,nonconverged")?;
    for p in scan {
        writeln!(w, "{},{},{},{}", p.x, p.max_defect, p.mean_defect, p.nonconverged)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrReport {
    pub trace: ShiftTrace,
    pub tail_mean: f64,
    /// Tail mean below [`DR_THRESHOLD`].
    pub convergent: bool,
}

/// Distance trace against 0 on `samples` equally spaced shifts in
/// `[0, x_max]`; convergent iff the mean over the last quarter is below
/// [`DR_THRESHOLD`].
pub fn denisov_rakhmanov_check(
    mu: &SignedMeasure,
    x_max: f64,
    samples: usize,
    metric: &MetricConfig,
) -> Result<DrReport, DynamicsError> {
    if samples < 2 {
        return Err(DynamicsError::Empty);
    }
    let xs: Vec<f64> = (0..samples)
        .map(|i| x_max * i as f64 / (samples - 1) as f64)
        .collect();
    let trace = shift_trace(mu, &xs, &SignedMeasure::zero(), metric)?;
    let tail_mean = trace.tail_mean();
    Ok(DrReport { convergent: tail_mean < DR_THRESHOLD, tail_mean, trace })
}
