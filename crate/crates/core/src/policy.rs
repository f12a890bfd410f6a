//! Stop/continue rules of the three access policies.
//!
//! Every threshold is inclusive: an observation exactly at the threshold
//! stops.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::SubLayerStats;

/// Verdict on one observation when a relay is chosen at the same time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// Transmit through this (0-based) relay.
    Stop {
        relay: usize,
    },
    Continue,
}

/// Verdict of a bi-level rule, where the relay is picked later by relay
/// contention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stop,
    Continue,
}

impl Verdict {
    fn stop_if(cond: bool) -> Self {
        if cond {
            Verdict::Stop
        } else {
            Verdict::Continue
        }
    }

    pub fn is_stop(self) -> bool {
        self == Verdict::Stop
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    FullCsi,
    IntuitiveBiLevel,
    OptimalBiLevel,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::FullCsi => "full-csi",
            PolicyKind::IntuitiveBiLevel => "intuitive-bi-level",
            PolicyKind::OptimalBiLevel => "optimal-bi-level",
        }
    }
}

/// A policy with its solved thresholds. Only the field matching `kind` is
/// read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub lambda_star: f64,
    pub gamma_star: f64,
}

impl PolicySpec {
    pub fn full_csi(lambda_star: f64) -> Self {
        Self {
            kind: PolicyKind::FullCsi,
            lambda_star,
            gamma_star: 0.0,
        }
    }

    pub fn intuitive(gamma_star: f64) -> Self {
        Self {
            kind: PolicyKind::IntuitiveBiLevel,
            lambda_star: 0.0,
            gamma_star,
        }
    }

    pub fn optimal(gamma_star: f64) -> Self {
        Self {
            kind: PolicyKind::OptimalBiLevel,
            lambda_star: 0.0,
            gamma_star,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (name, v) = match self.kind {
            PolicyKind::FullCsi => ("lambda_star", self.lambda_star),
            _ => ("gamma_star", self.gamma_star),
        };
        if !v.is_finite() {
            return Err(Error::param(name, format!("must be finite, got {v}")));
        }
        Ok(())
    }

    fn expect(&self, kind: PolicyKind, operation: &'static str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::InvalidPolicy {
                policy: self.kind.name(),
                operation,
            })
        }
    }
}

/// Stop at the best relay iff `rate >= 2 lambda*`.
pub fn full_csi_decide(spec: &PolicySpec, rate: f64, best_relay: usize) -> Result<Decision> {
    spec.expect(PolicyKind::FullCsi, "full-CSI decisions")?;
    Ok(if rate >= 2.0 * spec.lambda_star {
        Decision::Stop { relay: best_relay }
    } else {
        Decision::Continue
    })
}

/// Stop iff `r1 - gamma* r2 >= gamma* T/2`.
pub fn intuitive_main_decide(
    spec: &PolicySpec,
    stats: &SubLayerStats,
    t_data: f64,
) -> Result<Verdict> {
    spec.expect(
        PolicyKind::IntuitiveBiLevel,
        "intuitive main-layer decisions",
    )?;
    let g = spec.gamma_star;
    Ok(Verdict::stop_if(
        stats.r1 - g * stats.r2 >= g * t_data / 2.0,
    ))
}

/// Stop iff `rate_m >= lambda_sub`.
pub fn intuitive_sub_decide(lambda_sub: f64, rate_m: f64) -> Verdict {
    Verdict::stop_if(rate_m >= lambda_sub)
}

/// Stop iff `W*(gamma*) >= (T/2) gamma*`.
pub fn optimal_main_decide(spec: &PolicySpec, w_star: f64, t_data: f64) -> Result<Verdict> {
    spec.expect(PolicyKind::OptimalBiLevel, "optimal main-layer decisions")?;
    Ok(Verdict::stop_if(w_star >= t_data / 2.0 * spec.gamma_star))
}

/// Stop iff `(T/2) rate_m >= W* + (T/2) gamma*`.
pub fn optimal_sub_decide(
    spec: &PolicySpec,
    w_star: f64,
    rate_m: f64,
    t_data: f64,
) -> Result<Verdict> {
    spec.expect(PolicyKind::OptimalBiLevel, "optimal sub-layer decisions")?;
    let half = t_data / 2.0;
    Ok(Verdict::stop_if(
        half * rate_m >= w_star + half * spec.gamma_star,
    ))
}
