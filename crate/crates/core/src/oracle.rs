//! Past-to-future predictor built from a covering of training pasts by
//! metric balls.
//!
//! A training potential `ν` contributes the pair `(ν|J₋, ν|J₊)` with
//! `J₋ = (-L, 0)` and `J₊ = (a, b)`. Pasts form a greedy `2δ`-net in the
//! window metric `d₋`; a query past `σ` is answered with the convex blend of
//! stored futures weighted by `3δ - d₋(σ, ν_{j,-})` over the centers closer
//! than `3δ`. Queries farther than `3δ` from every center are refused.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{
    ClassBound, Embedding, MetricConfig, SignedMeasure, DEFAULT_METRIC_TERMS, METRIC_CONVENTION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("training set is empty")]
    EmptyTraining,
    #[error("invalid parameter {field}: {reason}")]
    BadParameter { field: &'static str, reason: String },
    #[error("training potential {index} leaves the class bound by {excess}")]
    NotInClass { index: usize, excess: f64 },
    #[error("query is {distance} from the nearest center; coverage ends at {limit}")]
    OutOfCoverage { distance: f64, limit: f64 },
    #[error("invalid blend weights: {0}")]
    BadWeights(String),
    #[error("model uses metric convention {found}, expected {expected}")]
    Convention { found: String, expected: String },
    #[error("model JSON: {0}")]
    Json(String),
    #[error("no (L, δ) pair reached ε = {epsilon}; best was L = {past_len}, δ = {delta} with error {error}")]
    CalibrationFailed {
        epsilon: f64,
        past_len: f64,
        delta: f64,
        error: f64,
    },
}

impl OracleError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            OracleError::EmptyTraining => "empty_training",
            OracleError::BadParameter { .. } => "bad_parameter",
            OracleError::NotInClass { .. } => "not_in_class",
            OracleError::OutOfCoverage { .. } => "out_of_coverage",
            OracleError::BadWeights(_) => "bad_weights",
            OracleError::Convention { .. } => "metric_convention",
            OracleError::Json(_) => "model_json",
            OracleError::CalibrationFailed { .. } => "calibration_failed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    /// `L` in `J₋ = (-L, 0)`.
    pub past_len: f64,
    /// `J₊ = (a, b)`.
    pub future: (f64, f64),
    pub delta: f64,
    pub epsilon: f64,
    pub class_bound: ClassBound,
    pub metric_terms: usize,
}

impl OracleParams {
    pub fn new(
        past_len: f64,
        future: (f64, f64),
        delta: f64,
        epsilon: f64,
        class_bound: ClassBound,
    ) -> Result<Self, OracleError> {
        let p = OracleParams {
            past_len,
            future,
            delta,
            epsilon,
            class_bound,
            metric_terms: DEFAULT_METRIC_TERMS,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |field, reason: &str| {
            Err(OracleError::BadParameter { field, reason: reason.to_string() })
        };
        if !(self.past_len > 0.0 && self.past_len.is_finite()) {
            return bad("past_len", "must be positive");
        }
        if !(self.future.0 < self.future.1) || !self.future.0.is_finite() || !self.future.1.is_finite() {
            return bad("future", "needs a < b");
        }
        if !(self.delta > 0.0) {
            return bad("delta", "must be positive");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon", "must be positive");
        }
        if self.delta > self.epsilon {
            return bad("delta", "must not exceed epsilon");
        }
        if self.metric_terms == 0 {
            return bad("metric_terms", "must be positive");
        }
        Ok(())
    }

    pub fn past_metric(&self) -> MetricConfig {
        MetricConfig::on_window(self.metric_terms, -self.past_len, 0.0)
    }

    pub fn future_metric(&self) -> MetricConfig {
        MetricConfig::on_window(self.metric_terms, self.future.0, self.future.1)
    }

    pub fn past_of(&self, mu: &SignedMeasure) -> SignedMeasure {
        mu.restrict(-self.past_len, 0.0)
    }

    pub fn future_of(&self, mu: &SignedMeasure) -> SignedMeasure {
        mu.restrict(self.future.0, self.future.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Center {
    pub past: SignedMeasure,
    pub future: SignedMeasure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleModel {
    pub params: OracleParams,
    pub centers: Vec<Center>,
    past_metric: MetricConfig,
    future_metric: MetricConfig,
    past_embeddings: Vec<Embedding>,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    convention: String,
    params: OracleParams,
    centers: Vec<Center>,
}

impl OracleModel {
    fn assemble(params: OracleParams, centers: Vec<Center>) -> Self {
        let past_metric = params.past_metric();
        let future_metric = params.future_metric();
        let past_embeddings = centers.iter().map(|c| past_metric.embed(&c.past)).collect();
        OracleModel { params, centers, past_metric, future_metric, past_embeddings }
    }

    pub fn past_metric(&self) -> &MetricConfig {
        &self.past_metric
    }

    pub fn future_metric(&self) -> &MetricConfig {
        &self.future_metric
    }

    /// `d₋(σ, ν_{j,-})` for every center.
    pub fn past_distances(&self, sigma: &SignedMeasure) -> Vec<f64> {
        let e = self.past_metric.embed(sigma);
        self.past_embeddings
            .iter()
            .map(|c| self.past_metric.distance_embedded(&e, c))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let raw = RawModel {
            convention: METRIC_CONVENTION.to_string(),
            params: self.params,
            centers: self.centers.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, OracleError> {
        let raw: RawModel = serde_json::from_str(s).map_err(|e| OracleError::Json(e.to_string()))?;
        if raw.convention != METRIC_CONVENTION {
            return Err(OracleError::Convention {
                found: raw.convention,
                expected: METRIC_CONVENTION.to_string(),
            });
        }
        raw.params.validate()?;
        Ok(OracleModel::assemble(raw.params, raw.centers))
    }
}

/// Greedy `2δ`-net over the pasts of `training`, in input order.
pub fn build_oracle(training: &[SignedMeasure], params: OracleParams) -> Result<OracleModel, OracleError> {
    params.validate()?;
    if training.is_empty() {
        return Err(OracleError::EmptyTraining);
    }
    let pairs: Vec<Center> = training
        .par_iter()
        .map(|mu| Center { past: params.past_of(mu), future: params.future_of(mu) })
        .collect();
    for (index, c) in pairs.iter().enumerate() {
        for part in [&c.past, &c.future] {
            let r = part.vc_membership(params.class_bound);
            if !r.member {
                return Err(OracleError::NotInClass { index, excess: r.excess });
            }
        }
    }
    let metric = params.past_metric();
    let emb: Vec<Embedding> = pairs.par_iter().map(|c| metric.embed(&c.past)).collect();
    let mut chosen: Vec<usize> = Vec::new();
    for (i, e) in emb.iter().enumerate() {
        let far = chosen
            .iter()
            .all(|&j| metric.distance_embedded(e, &emb[j]) >= 2.0 * params.delta);
        if far {
            chosen.push(i);
        }
    }
    let centers = chosen.into_iter().map(|i| pairs[i].clone()).collect();
    Ok(OracleModel::assemble(params, centers))
}

/// Convex weights over a subset of indices.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendWeights {
    indices: Vec<usize>,
    weights: Vec<f64>,
}

impl BlendWeights {
    /// Requires positive weights summing to 1 within `1e-12`.
    pub fn new(indices: Vec<usize>, weights: Vec<f64>) -> Result<Self, OracleError> {
        if indices.len() != weights.len() || indices.is_empty() {
            return Err(OracleError::BadWeights("index and weight lists differ or are empty".into()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(OracleError::BadWeights("weights must be positive".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(OracleError::BadWeights(format!("weights sum to {s}")));
        }
        Ok(BlendWeights { indices, weights })
    }

    /// Normalizes positive raw weights.
    pub fn normalized(indices: Vec<usize>, raw: &[f64]) -> Result<Self, OracleError> {
        let s: f64 = raw.iter().sum();
        BlendWeights::new(indices, raw.iter().map(|w| w / s).collect())
    }

    pub fn single(index: usize) -> Self {
        BlendWeights { indices: vec![index], weights: vec![1.0] }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// `Σ w_j μ_j`.
pub fn blend(measures: &[SignedMeasure], weights: &BlendWeights) -> SignedMeasure {
    let terms: Vec<(f64, &SignedMeasure)> = weights
        .indices
        .iter()
        .zip(&weights.weights)
        .map(|(&i, &w)| (w, &measures[i]))
        .collect();
    SignedMeasure::linear_combination(&terms)
}

/// Upper bound `6ε ln(1/ε)` on the blend distance for `ε ≤ 1/4`.
pub fn blend_bound(epsilon: f64) -> f64 {
    6.0 * epsilon * (1.0 / epsilon).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub future: SignedMeasure,
    pub weights: BlendWeights,
    pub min_distance: f64,
    /// Nearest center is farther than `2δ`: outside the region the net
    /// certifies, though still within `3δ`.
    pub coverage_flag: bool,
}

pub fn predict(model: &OracleModel, sigma: &SignedMeasure) -> Result<Prediction, OracleError> {
    let three = 3.0 * model.params.delta;
    let d = model.past_distances(sigma);
    let min_distance = d.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_distance < three) {
        return Err(OracleError::OutOfCoverage { distance: min_distance, limit: three });
    }
    let (indices, raw): (Vec<usize>, Vec<f64>) = d
        .iter()
        .enumerate()
        .filter(|(_, &dj)| dj < three)
        .map(|(j, &dj)| (j, three - dj))
        .unzip();
    let weights = BlendWeights::normalized(indices, &raw)?;
    let futures: Vec<&SignedMeasure> = model.centers.iter().map(|c| &c.future).collect();
    let terms: Vec<(f64, &SignedMeasure)> = weights
        .indices
        .iter()
        .zip(&weights.weights)
        .map(|(&i, &w)| (w, futures[i]))
        .collect();
    Ok(Prediction {
        future: SignedMeasure::linear_combination(&terms),
        weights,
        min_distance,
        coverage_flag: min_distance > 2.0 * model.params.delta,
    })
}

/// Grids searched by [`calibrate`].
pub const CALIBRATION_LENGTHS: [f64; 5] = [2.0, 4.0, 8.0, 16.0, 32.0];
pub const CALIBRATION_DELTAS: [f64; 4] = [0.1, 0.05, 0.02, 0.01];

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: OracleParams,
    /// Largest leave-one-out error `d₊(prediction, truth)`.
    pub achieved_error: f64,
    /// `(L, δ, error)` for every pair tried, in search order.
    pub tried: Vec<(f64, f64, f64)>,
}

/// Leave-one-out error of the oracle over `samples`; refusals count as
/// infinite error. A single sample is scored in-sample.
pub fn leave_one_out_error(samples: &[SignedMeasure], params: OracleParams) -> Result<f64, OracleError> {
    if samples.len() == 1 {
        let m = build_oracle(samples, params)?;
        let p = predict(&m, &params.past_of(&samples[0]))?;
        return Ok(m.future_metric.distance(&p.future, &params.future_of(&samples[0])).value);
    }
    let errs = (0..samples.len())
        .into_par_iter()
        .map(|i| {
            let rest: Vec<SignedMeasure> = samples
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, m)| m.clone())
                .collect();
            let model = build_oracle(&rest, params)?;
            Ok(match predict(&model, &params.past_of(&samples[i])) {
                Ok(p) => model
                    .future_metric
                    .distance(&p.future, &params.future_of(&samples[i]))
                    .value,
                Err(OracleError::OutOfCoverage { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            })
        })
        .collect::<Result<Vec<f64>, OracleError>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

/// Searches `L` ascending and `δ ≤ ε` descending for the first pair whose
/// leave-one-out error over `{S_s ν : ν ∈ family, s ∈ shifts}` is below `ε`.
pub fn calibrate(
    family: &[SignedMeasure],
    shifts: &[f64],
    epsilon: f64,
    future: (f64, f64),
    class_bound: ClassBound,
) -> Result<Calibration, OracleError> {
    if family.is_empty() {
        return Err(OracleError::EmptyTraining);
    }
    let shifts = if shifts.is_empty() { &[0.0][..] } else { shifts };
    let samples: Vec<SignedMeasure> = family
        .iter()
        .flat_map(|m| shifts.iter().map(move |&s| m.shift(s)))
        .collect();
    let mut tried = Vec::new();
    let mut best: Option<(OracleParams, f64)> = None;
    for &l in &CALIBRATION_LENGTHS {
        for &delta in CALIBRATION_DELTAS.iter().filter(|&&d| d <= epsilon) {
            let params = OracleParams::new(l, future, delta, epsilon, class_bound)?;
            let err = leave_one_out_error(&samples, params)?;
            tried.push((l, delta, err));
            if err < epsilon {
                return Ok(Calibration { params, achieved_error: err, tried });
            }
            if best.is_none_or(|(_, e)| err < e) {
                best = Some((params, err));
            }
        }
    }
    let (p, error) = best.ok_or_else(|| OracleError::BadParameter {
        field: "epsilon",
        reason: format!("no δ in the grid is ≤ {epsilon}"),
    })?;
    Err(OracleError::CalibrationFailed { epsilon, past_len: p.past_len, delta: p.delta, error })
}
