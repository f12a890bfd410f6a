//! Threshold equations of the three stopping rules and their numerical
//! solution.
//!
//! Second-hop expectations are one-dimensional and are evaluated by
//! quadrature of closed-form tail probabilities. First-hop expectations are
//! Monte Carlo averages over a fixed, seed-determined sample set that is
//! reused for every trial threshold, so each residual is an exactly monotone
//! function of its unknown and bisection converges to the unique root of the
//! realized estimator.

mod bilevel;
mod full_csi;
mod oracle;
mod quadrature;
pub mod roots;
mod sublayer;

use serde::{Deserialize, Serialize};

pub use bilevel::{
    first_hop_sample, solve_main_gamma_intuitive, solve_main_gamma_optimal, FirstHopSample,
    IntuitiveMainLayer, OptimalMainLayer, MIN_GAMMA,
};
pub use full_csi::{
    expected_positive_part_full_csi, full_csi_residual, solve_full_csi_lambda, RateSample,
};
pub use oracle::{oracle_threshold_search, renewal_throughput, OracleResult};
pub use quadrature::GaussLegendre;
pub use sublayer::{
    solve_sub_layer_intuitive, solve_sub_w, sub_layer_expected_positive_part, sub_layer_tail_prob,
    SubLayerLaw, SubLayerW,
};

use crate::error::{Error, Result};

/// Sample sizes, quadrature resolution and root-finding tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    /// Monte Carlo realizations for first-hop (outer) expectations.
    pub mc_samples: usize,
    /// Quadrature nodes for second-hop integrals.
    pub quad_points: usize,
    /// Root seed of the fixed sample set.
    pub seed: u64,
    /// Residual tolerance of every threshold equation.
    pub tol: f64,
    /// Iteration cap for root finding and bracket growth.
    pub max_iter: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            mc_samples: 100_000,
            quad_points: 64,
            seed: 1,
            tol: 1e-9,
            max_iter: 200,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mc_samples == 0 {
            return Err(Error::param("mc_samples", "must be at least 1"));
        }
        if self.quad_points == 0 {
            return Err(Error::param("quad_points", "must be at least 1"));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::param(
                "tol",
                format!("must be > 0, got {}", self.tol),
            ));
        }
        if self.max_iter < 50 {
            return Err(Error::param(
                "max_iter",
                format!("must be at least 50, got {}", self.max_iter),
            ));
        }
        Ok(())
    }

    pub fn quadrature(&self) -> GaussLegendre {
        GaussLegendre::new(self.quad_points)
    }
}

/// A solved threshold with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSolution {
    pub value: f64,
    /// Equation residual at `value`.
    pub residual: f64,
    pub iterations: usize,
    /// Final bracket; `value` is one of its endpoints.
    pub bracket: (f64, f64),
}

impl ThresholdSolution {
    pub(crate) fn exact(value: f64, residual: f64) -> Self {
        Self {
            value,
            residual,
            iterations: 0,
            bracket: (value, value),
        }
    }
}

/// Outcome of the throughput-maximizing sub-layer rule for one first-hop
/// realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubLayerStats {
    /// Maximal sub-layer throughput; also the sub-layer rate threshold.
    pub lambda_sub: f64,
    /// Expected bits delivered by the sub-layer, `lambda_sub * r2`.
    pub r1: f64,
    /// Expected sub-layer duration: relay contention plus `T/2`.
    pub r2: f64,
    /// Probability that one relay observation meets the threshold.
    pub p_stop: f64,
    /// Residual of the sub-layer threshold equation.
    pub residual: f64,
}
