//! Main-layer problems of the scenario without second-hop CSI.
//!
//! Both rules average a per-realization quantity over one fixed set of
//! first-hop realizations. The intuitive rule needs the sub-layer statistics
//! `(r1, r2)` of each realization once; the optimal rule re-solves `W*(gamma)`
//! for every realization at every trial `gamma`, warm-started from a first
//! order prediction of the previous solution.

use super::roots::solve_decreasing;
use super::sublayer::SubLayerLaw;
use super::{EstimatorConfig, GaussLegendre, SubLayerStats, ThresholdSolution};
use crate::channel::{stream_rng, ChannelModel, SystemParams};
use crate::error::{Error, Result};

/// Smallest `gamma` handed to the sub-layer `W` equation, which degenerates
/// at exactly zero.
pub const MIN_GAMMA: f64 = 1e-12;

/// Inner `W` solves run this much tighter than the outer tolerance so the
/// outer residual stays monotone at the outer tolerance.
const INNER_TOL_FACTOR: f64 = 1e-3;

/// The fixed set of first-hop realizations behind every main-layer average.
#[derive(Debug, Clone)]
pub struct FirstHopSample {
    pub laws: Vec<SubLayerLaw>,
    pub weights: Vec<f64>,
}

impl FirstHopSample {
    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }
}

/// Draws `est.mc_samples` first-hop realizations, realization `i` from
/// stream `i`. A deterministic first hop collapses to one realization.
pub fn first_hop_sample(
    params: &SystemParams,
    model: &ChannelModel,
    est: &EstimatorConfig,
) -> Result<FirstHopSample> {
    params.validate()?;
    model.validate()?;
    est.validate()?;
    let n = if model.first_hop_is_deterministic() {
        1
    } else {
        est.mc_samples
    };
    let mut f = vec![0.0; params.relays];
    let laws = (0..n as u64)
        .map(|i| {
            model.draw_first_hop(params, &mut stream_rng(est.seed, i), &mut f);
            SubLayerLaw::new(params, model, &f)
        })
        .collect();
    Ok(FirstHopSample {
        laws,
        weights: vec![1.0 / n as f64; n],
    })
}

fn main_contention_cost(params: &SystemParams) -> Result<f64> {
    let ps = params.source_success();
    if ps <= 0.0 {
        return Err(Error::NonTerminatingContention(format!(
            "source contention with K = {} and p0 = {} never succeeds",
            params.sources, params.p0
        )));
    }
    // scenario-2 slots last tau / 2
    Ok(params.slot / (2.0 * ps))
}

/// Main layer of the intuitive rule: sub-layer statistics per realization.
#[derive(Debug, Clone)]
pub struct IntuitiveMainLayer {
    pub stats: Vec<SubLayerStats>,
    weights: Vec<f64>,
    half: f64,
    cost: f64,
}

impl IntuitiveMainLayer {
    pub fn build(
        params: &SystemParams,
        sample: &FirstHopSample,
        est: &EstimatorConfig,
    ) -> Result<Self> {
        let cost = main_contention_cost(params)?;
        let quad = est.quadrature();
        let stats = sample
            .laws
            .iter()
            .map(|law| law.solve_intuitive(params, &quad, est.tol, est.max_iter))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            stats,
            weights: sample.weights.clone(),
            half: 0.5 * params.data_time,
            cost,
        })
    }

    /// `H(gamma) = E[max(r1 - gamma r2 - gamma T/2, 0)] - gamma tau / (2 p_s)`
    /// and its derivative.
    pub fn residual(&self, gamma: f64) -> (f64, f64) {
        let (mut value, mut slope) = (0.0, -self.cost);
        for (s, w) in self.stats.iter().zip(&self.weights) {
            let excess = s.r1 - gamma * (s.r2 + self.half);
            if excess > 0.0 {
                value += w * excess;
                slope -= w * (s.r2 + self.half);
            }
        }
        (value - gamma * self.cost, slope)
    }

    pub fn solve(&self, est: &EstimatorConfig) -> Result<ThresholdSolution> {
        let (h0, _) = self.residual(0.0);
        if h0 <= 0.0 {
            return Ok(ThresholdSolution::exact(0.0, h0));
        }
        // H is negative once every realization's excess has vanished.
        let hi = self
            .stats
            .iter()
            .map(|s| s.r1 / (s.r2 + self.half))
            .fold(0.0, f64::max);
        solve_decreasing(
            "intuitive main-layer gamma",
            |g| {
                let (v, d) = self.residual(g);
                (v, Some(d))
            },
            0.0,
            hi,
            Some(0.0),
            est.tol,
            est.max_iter,
        )
    }
}

/// Main layer of the optimal rule.
#[derive(Debug)]
pub struct OptimalMainLayer<'a> {
    params: SystemParams,
    sample: &'a FirstHopSample,
    quad: GaussLegendre,
    half: f64,
    cost: f64,
    relay_cost: f64,
    inner_tol: f64,
    max_iter: usize,
}

/// Per-realization warm-start state: the last `gamma` and `(W, dW/dgamma)`.
struct WarmStart {
    gamma: f64,
    w: Vec<Option<(f64, f64)>>,
}

impl<'a> OptimalMainLayer<'a> {
    pub fn build(
        params: &SystemParams,
        sample: &'a FirstHopSample,
        est: &EstimatorConfig,
    ) -> Result<Self> {
        est.validate()?;
        let cost = main_contention_cost(params)?;
        let pr = params.relay_success();
        if pr <= 0.0 {
            return Err(Error::NonTerminatingContention(format!(
                "relay contention with L = {} and p1 = {} never succeeds",
                params.relays, params.p1
            )));
        }
        Ok(Self {
            params: *params,
            sample,
            quad: est.quadrature(),
            half: 0.5 * params.data_time,
            cost,
            relay_cost: params.slot / (2.0 * pr),
            inner_tol: est.tol * INNER_TOL_FACTOR,
            max_iter: est.max_iter,
        })
    }

    /// `W*_i(gamma)` for realization `i`, solved cold.
    pub fn w_star(&self, i: usize, gamma: f64) -> Result<f64> {
        let sol = self.sample.laws[i].solve_w(
            &self.params,
            gamma,
            &self.quad,
            self.inner_tol,
            self.max_iter,
            None,
        )?;
        Ok(sol.solution.value)
    }

    /// `J(gamma) = E[max(W*(gamma) - (T/2) gamma, 0)] - tau gamma / (2 p_s)`.
    pub fn value(&self, gamma: f64) -> Result<f64> {
        Ok(self.evaluate(gamma.max(MIN_GAMMA), None)?.0)
    }

    /// `value` along `gammas`, warm-starting each point from the previous
    /// one. Much cheaper than separate calls on a fine ascending grid.
    pub fn value_curve(&self, gammas: &[f64]) -> Result<Vec<f64>> {
        let mut warm = WarmStart {
            gamma: MIN_GAMMA,
            w: vec![None; self.sample.len()],
        };
        gammas
            .iter()
            .map(|&g| Ok(self.evaluate(g.max(MIN_GAMMA), Some(&mut warm))?.0))
            .collect()
    }

    fn evaluate(&self, gamma: f64, mut warm: Option<&mut WarmStart>) -> Result<(f64, Option<f64>)> {
        let (mut value, mut slope) = (0.0, -self.cost);
        let mut slope_ok = true;
        for (i, (law, wt)) in self
            .sample
            .laws
            .iter()
            .zip(&self.sample.weights)
            .enumerate()
        {
            let start = warm
                .as_ref()
                .and_then(|ws| ws.w[i].map(|(w, dw)| w + dw * (gamma - ws.gamma)));
            let sol = law.solve_w(
                &self.params,
                gamma,
                &self.quad,
                self.inner_tol,
                self.max_iter,
                start,
            )?;
            let w = sol.solution.value;
            // implicit differentiation of the W equation
            let dw = if sol.p_stop > 0.0 {
                -self.half - self.relay_cost / sol.p_stop
            } else {
                f64::NEG_INFINITY
            };
            if let Some(ws) = warm.as_deref_mut() {
                ws.w[i] = Some((w, if dw.is_finite() { dw } else { 0.0 }));
            }
            let excess = w - self.half * gamma;
            if excess > 0.0 {
                value += wt * excess;
                if dw.is_finite() {
                    slope += wt * (dw - self.half);
                } else {
                    slope_ok = false;
                }
            }
        }
        if let Some(ws) = warm {
            ws.gamma = gamma;
        }
        Ok((value - gamma * self.cost, slope_ok.then_some(slope)))
    }

    /// Root of `J`; `start` is an optional initial guess (the intuitive
    /// rule's `gamma*` is a good one since it never exceeds the root).
    pub fn solve(&self, est: &EstimatorConfig, start: Option<f64>) -> Result<ThresholdSolution> {
        let lo = MIN_GAMMA;
        // W* <= (T/2)(sat - gamma), so J < 0 once gamma >= sat / 2 everywhere.
        let hi = self
            .sample
            .laws
            .iter()
            .map(|l| 0.5 * l.saturation())
            .fold(0.0, f64::max);
        if hi <= lo {
            // Every rate is zero: W* < (T/2) gamma, so J(gamma) = -gamma tau / (2 p_s).
            return Ok(ThresholdSolution::exact(lo, -lo * self.cost));
        }
        // Otherwise J(0+) is the mean of (T/2) sat > 0, so [lo, hi] brackets the root.
        let mut warm = WarmStart {
            gamma: lo,
            w: vec![None; self.sample.len()],
        };
        let mut failure = None;
        let result = solve_decreasing(
            "optimal main-layer gamma",
            |g| match self.evaluate(g, Some(&mut warm)) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    (f64::NAN, None)
                }
            },
            lo,
            hi,
            start.map(|s| s.clamp(lo, hi)),
            est.tol,
            est.max_iter,
        );
        match failure {
            Some(e) => Err(e),
            None => result,
        }
    }
}

/// `gamma*` of the intuitive bi-level rule.
pub fn solve_main_gamma_intuitive(
    params: &SystemParams,
    model: &ChannelModel,
    est: &EstimatorConfig,
) -> Result<ThresholdSolution> {
    let sample = first_hop_sample(params, model, est)?;
    IntuitiveMainLayer::build(params, &sample, est)?.solve(est)
}

/// `gamma*` of the optimal bi-level rule.
pub fn solve_main_gamma_optimal(
    params: &SystemParams,
    model: &ChannelModel,
    est: &EstimatorConfig,
) -> Result<ThresholdSolution> {
    let sample = first_hop_sample(params, model, est)?;
    let start = IntuitiveMainLayer::build(params, &sample, est)?
        .solve(est)?
        .value;
    OptimalMainLayer::build(params, &sample, est)?.solve(est, Some(start))
}
