//! Importance-weighted mean outcome.

use serde::{Deserialize, Serialize};

use crate::error::StatsError;

/// One executed universe: its outcome and the density it was drawn with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSample {
    pub universe_id: usize,
    pub y: f64,
    pub g: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanEstimator {
    /// `(1/|T|) Σ y_i f/g_i` with `f = 1/n`.
    #[default]
    LikelihoodRatio,
    /// `Σ w_i y_i / Σ w_i` with `w_i = f/g_i`.
    SelfNormalized,
}

fn ordered(samples: &[OutcomeSample]) -> Vec<OutcomeSample> {
    let mut v = samples.to_vec();
    v.sort_by_key(|s| s.universe_id);
    v
}

/// Importance-weighted mean over a target that is uniform on `n` universes.
/// Terms are summed in ascending universe id.
pub fn weighted_mean(samples: &[OutcomeSample], n: usize) -> Result<f64, StatsError> {
    weighted_mean_with(samples, n, MeanEstimator::LikelihoodRatio)
}

pub fn weighted_mean_with(samples: &[OutcomeSample], n: usize, estimator: MeanEstimator) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::TooFewObservations);
    }
    if let Some(bad) = samples.iter().find(|s| !(s.g > 0.0)) {
        return Err(StatsError::NonPositiveWeight(bad.g));
    }
    let f = 1.0 / n as f64;
    let samples = ordered(samples);
    match estimator {
        MeanEstimator::LikelihoodRatio => {
            let total: f64 = samples.iter().map(|s| s.y * (f / s.g)).sum();
            Ok(total / samples.len() as f64)
        }
        MeanEstimator::SelfNormalized => {
            let (num, den) = samples
                .iter()
                .fold((0.0, 0.0), |(num, den), s| (num + s.y * (f / s.g), den + f / s.g));
            Ok(num / den)
        }
    }
}

/// Plain mean, summed in the same order as [`weighted_mean`].
pub fn arithmetic_mean(samples: &[OutcomeSample]) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::TooFewObservations);
    }
    let total: f64 = ordered(samples).iter().map(|s| s.y).sum();
    Ok(total / samples.len() as f64)
}
