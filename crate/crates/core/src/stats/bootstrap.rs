//! Bias-corrected and accelerated (BCa) bootstrap intervals.
//!
//! Resample `b` draws its indices from ChaCha stream `b` of the caller's seed, so
//! resamples are evaluated in parallel yet the interval is a pure function of the seed.

use rayon::prelude::*;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::StatsError;
use crate::sampler::rng_for;

/// Resamples used for live progress snapshots.
pub const LIVE_RESAMPLES: usize = 500;
/// Resamples used for offline reports.
pub const OFFLINE_RESAMPLES: usize = 2000;
/// Beyond this many observations the acceleration uses a delete-block jackknife.
const JACKKNIFE_MAX_BLOCKS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BcaInterval {
    pub ci: ConfidenceInterval,
    pub estimate: f64,
    pub z0: f64,
    pub acceleration: f64,
    /// True when every resample fell on one side of the estimate and the plain
    /// percentile interval was returned instead.
    pub percentile_fallback: bool,
    pub resamples: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub seed: u64,
    pub level: f64,
}

impl BootstrapConfig {
    pub fn live(seed: u64) -> Self {
        BootstrapConfig { resamples: LIVE_RESAMPLES, seed, level: 0.95 }
    }

    pub fn offline(seed: u64) -> Self {
        BootstrapConfig { resamples: OFFLINE_RESAMPLES, seed, level: 0.95 }
    }
}

/// BCa interval for `statistic` over `data`. Resamples on which the statistic is
/// undefined (`None`) are dropped; more than half dropped is an error.
pub fn bootstrap_ci_bca<T, F>(data: &[T], statistic: F, config: BootstrapConfig) -> Result<BcaInterval, StatsError>
where
    T: Clone + Send + Sync,
    F: Fn(&[T]) -> Option<f64> + Sync,
{
    let n = data.len();
    if n < 2 {
        return Err(StatsError::TooFewObservations);
    }
    if config.resamples < 100 {
        return Err(StatsError::TooFewResamples(config.resamples));
    }
    let estimate = statistic(data).ok_or(StatsError::TooFewObservations)?;

    let mut stats: Vec<f64> = (0..config.resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(config.seed, b as u64);
            let resample: Vec<T> = (0..n).map(|_| data[rng.gen_range(0..n)].clone()).collect();
            statistic(&resample).filter(|v| !v.is_nan())
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let dropped = config.resamples - stats.len();
    if dropped * 2 > config.resamples {
        return Err(StatsError::TooManyDropped { dropped, total: config.resamples });
    }
    stats.sort_by(f64::total_cmp);

    let alpha = (1.0 - config.level) / 2.0;
    let normal = Normal::standard();
    let below = stats.iter().filter(|&&s| s < estimate).count();
    let prop = below as f64 / stats.len() as f64;

    if prop <= 0.0 || prop >= 1.0 {
        let ci = ConfidenceInterval {
            lo: quantile_sorted(&stats, alpha),
            hi: quantile_sorted(&stats, 1.0 - alpha),
            level: config.level,
        };
        let z0 = if prop <= 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
        return Ok(BcaInterval {
            ci,
            estimate,
            z0,
            acceleration: 0.0,
            percentile_fallback: true,
            resamples: stats.len(),
            dropped,
        });
    }

    let z0 = normal.inverse_cdf(prop);
    let acceleration = jackknife_acceleration(data, &statistic);
    let adjust = |z: f64| {
        let denom = 1.0 - acceleration * (z0 + z);
        if denom <= 0.0 {
            return if z < 0.0 { 0.0 } else { 1.0 };
        }
        normal.cdf(z0 + (z0 + z) / denom)
    };
    let lo_p = adjust(normal.inverse_cdf(alpha));
    let hi_p = adjust(normal.inverse_cdf(1.0 - alpha));
    let ci = ConfidenceInterval {
        lo: quantile_sorted(&stats, lo_p),
        hi: quantile_sorted(&stats, hi_p),
        level: config.level,
    };
    Ok(BcaInterval { ci, estimate, z0, acceleration, percentile_fallback: false, resamples: stats.len(), dropped })
}

/// Acceleration from jackknife skewness; leave-one-out up to
/// `JACKKNIFE_MAX_BLOCKS` observations, contiguous delete-block beyond that.
fn jackknife_acceleration<T, F>(data: &[T], statistic: &F) -> f64
where
    T: Clone + Send + Sync,
    F: Fn(&[T]) -> Option<f64> + Sync,
{
    let n = data.len();
    let blocks = n.min(JACKKNIFE_MAX_BLOCKS);
    let values: Vec<f64> = (0..blocks)
        .into_par_iter()
        .filter_map(|b| {
            let start = b * n / blocks;
            let end = (b + 1) * n / blocks;
            let mut rest = Vec::with_capacity(n - (end - start));
            rest.extend_from_slice(&data[..start]);
            rest.extend_from_slice(&data[end..]);
            statistic(&rest).filter(|v| v.is_finite())
        })
        .collect();
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let (mut s2, mut s3) = (0.0, 0.0);
    for v in &values {
        let d = mean - v;
        s2 += d * d;
        s3 += d * d * d;
    }
    if s2 == 0.0 {
        return 0.0;
    }
    s3 / (6.0 * s2.powf(1.5))
}

/// Linear-interpolation quantile of ascending data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
