//! Brute-force check of the full-CSI threshold: evaluate the renewal-reward
//! throughput of every pure-threshold rule on a grid and keep the best.

use serde::{Deserialize, Serialize};

use super::RateSample;
use crate::channel::SystemParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_threshold: f64,
    pub best_throughput: f64,
    /// Grid points with a positive stopping probability.
    pub evaluated: usize,
}

/// Long-run throughput of "stop at the first `R >= theta`".
///
/// Each observation costs `tau / p_s` on average and the cycle ends after a
/// geometric number of observations with success `P(R >= theta)`, so
/// `throughput = (T/2) E[R 1{R >= theta}] / (T P(R >= theta) + tau / p_s)`.
/// Returns `None` when the rule never stops.
pub fn renewal_throughput(params: &SystemParams, sample: &RateSample, theta: f64) -> Option<f64> {
    let q = sample.tail(theta);
    if q <= 0.0 {
        return None;
    }
    let cost = params.slot / params.source_success();
    Some(0.5 * params.data_time * sample.partial_mean(theta) / (params.data_time * q + cost))
}

/// Best pure-threshold rule over an ascending `grid`.
pub fn oracle_threshold_search(
    params: &SystemParams,
    sample: &RateSample,
    grid: &[f64],
) -> Result<OracleResult> {
    if grid.is_empty() {
        return Err(Error::param("grid", "must not be empty"));
    }
    if grid.iter().any(|t| t.is_nan()) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("grid", "must be sorted ascending"));
    }
    if params.source_success() <= 0.0 {
        return Err(Error::NonTerminatingContention(
            "source contention never succeeds".into(),
        ));
    }
    let mut best: Option<(f64, f64)> = None;
    let mut evaluated = 0;
    for &theta in grid {
        let Some(y) = renewal_throughput(params, sample, theta) else {
            continue;
        };
        evaluated += 1;
        if best.is_none_or(|(_, b)| y > b) {
            best = Some((theta, y));
        }
    }
    let (best_threshold, best_throughput) = best.ok_or_else(|| {
        Error::InsufficientData("no grid threshold has a positive stopping probability".into())
    })?;
    Ok(OracleResult {
        best_threshold,
        best_throughput,
        evaluated,
    })
}
