//! Sample spatial depth and depth-based observation weights.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimating::Sample;
use crate::ustat::pairwise_sum;

/// Default lower bound applied to depths before normalisation.
pub const DEFAULT_DEPTH_FLOOR: f64 = 1e-12;

const PAR_POINTS: usize = 128;

/// Strictly positive weights summing to one, with `c_hat = sum_i n w_i^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    c_hat: f64,
    degenerate: bool,
}

impl WeightVector {
    /// Validates and wraps a weight vector. Weights must be positive and sum to
    /// one within `1e-12`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidWeights(format!("weight {w} is not strictly positive")));
        }
        let total = pairwise_sum(&weights);
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(Self::from_normalized(weights, false))
    }

    /// Normalises positive scores into weights.
    pub fn from_scores(scores: &[f64]) -> Result<Self> {
        if scores.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidWeights("scores must be positive".into()));
        }
        let total = pairwise_sum(scores);
        Ok(Self::from_normalized(
            scores.iter().map(|s| s / total).collect(),
            false,
        ))
    }

    fn from_normalized(weights: Vec<f64>, degenerate: bool) -> Self {
        let n = weights.len() as f64;
        let sq: Vec<f64> = weights.iter().map(|w| w * w).collect();
        let c_hat = n * pairwise_sum(&sq);
        Self {
            weights,
            c_hat,
            degenerate,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Self-normalisation constant `sum_i n w_i^2` (at least one).
    pub fn c_hat(&self) -> f64 {
        self.c_hat
    }

    /// Set when depth weighting fell back to uniform weights.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Uniform weights `1/n`; reduces weighted JEL to plain JEL.
pub fn uniform_weights(n: usize) -> WeightVector {
    let n = n.max(1);
    WeightVector {
        weights: vec![1.0 / n as f64; n],
        c_hat: 1.0,
        degenerate: false,
    }
}

/// Sample spatial depth `1 - || (1/n) sum_i S(x - X_i) ||`, with `S(0) = 0`.
pub fn spatial_depth(x: &[f64], data: &Sample) -> f64 {
    let d = x.len();
    let mut acc = vec![0.0; d];
    let mut diff = vec![0.0; d];
    for row in data.rows() {
        let mut norm2 = 0.0;
        for j in 0..d {
            diff[j] = x[j] - row[j];
            norm2 += diff[j] * diff[j];
        }
        if norm2 > 0.0 {
            let inv = 1.0 / norm2.sqrt();
            for j in 0..d {
                acc[j] += diff[j] * inv;
            }
        }
    }
    let n = data.len() as f64;
    let norm = acc.iter().map(|a| (a / n) * (a / n)).sum::<f64>().sqrt();
    (1.0 - norm).clamp(0.0, 1.0)
}

/// Spatial depth of every observation with respect to the whole sample.
pub fn sample_depths(data: &Sample) -> Vec<f64> {
    let n = data.len();
    if n >= PAR_POINTS {
        (0..n)
            .into_par_iter()
            .map(|i| spatial_depth(data.row(i), data))
            .collect()
    } else {
        (0..n).map(|i| spatial_depth(data.row(i), data)).collect()
    }
}

/// Weights proportional to `max(depth, floor)`.
///
/// If every depth is at or below `floor` the result is uniform and flagged
/// degenerate.
pub fn depth_weights(data: &Sample, floor: f64) -> Result<WeightVector> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::InvalidWeights(format!("depth floor {floor} must be positive")));
    }
    let depths = sample_depths(data);
    if depths.iter().all(|&d| d <= floor) {
        let mut w = uniform_weights(n);
        w.degenerate = true;
        return Ok(w);
    }
    let scores: Vec<f64> = depths.iter().map(|&d| d.max(floor)).collect();
    WeightVector::from_scores(&scores)
}

/// Plug-in estimate of `c = E[D^2] / (E[D])^2` from depth values.
pub fn limit_constant_oracle(depths: &[f64]) -> Result<f64> {
    if depths.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let n = depths.len() as f64;
    let mean = pairwise_sum(depths) / n;
    if mean <= 0.0 {
        return Err(Error::ZeroMeanDepth);
    }
    let sq: Vec<f64> = depths.iter().map(|d| d * d).collect();
    Ok(pairwise_sum(&sq) / n / (mean * mean))
}
