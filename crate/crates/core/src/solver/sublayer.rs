//! Relay-level (sub-layer) stopping problems conditioned on first-hop gains.
//!
//! In a sub-layer observation a uniformly chosen relay wins contention and
//! sees a fresh second-hop gain, so the observed rate is a uniform mixture
//! over relays of the AF rate with that relay's first-hop gain held fixed.
//! For Rayleigh second hops the rate inverts in closed form:
//! `rate >= t` iff `|g|^2 >= (2^t-1)(1+a) / (P_r (a-(2^t-1)))` with
//! `a = P_s |f|^2`, giving an exponential tail.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::roots::solve_decreasing;
use super::{EstimatorConfig, GaussLegendre, SubLayerStats, ThresholdSolution};
use crate::channel::{
    af_rate, rate_saturation, ChannelModel, GainLaw, RateLaw, SystemParams, GAIN_CAP,
};
use crate::error::{Error, Result};

/// Law of the sub-layer rate `R_m` given first-hop gains.
#[derive(Debug, Clone, PartialEq)]
pub enum SubLayerLaw {
    /// Exponential second-hop gains with mean `g_var`.
    Rayleigh {
        ps: f64,
        pr: f64,
        g_var: f64,
        f_sq: Vec<f64>,
    },
    /// Every second-hop gain equals `g_sq`.
    FixedSecondHop {
        ps: f64,
        pr: f64,
        g_sq: f64,
        f_sq: Vec<f64>,
    },
    /// Rate drawn from a finite law regardless of the relay.
    Rate(RateLaw),
}

/// Solution of the reward-maximizing sub-layer problem at a given `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubLayerW {
    /// `W*(gamma)` with the residual of its equation.
    pub solution: ThresholdSolution,
    /// Rate threshold `gamma + 2 W*/T` of the sub-layer stop rule.
    pub rate_threshold: f64,
    /// Probability that one relay observation stops.
    pub p_stop: f64,
}

impl SubLayerLaw {
    pub fn new(params: &SystemParams, model: &ChannelModel, f_sq: &[f64]) -> Self {
        match model {
            ChannelModel::Fading {
                second_hop: GainLaw::Rayleigh,
                ..
            } => Self::rayleigh(params, f_sq),
            ChannelModel::Fading {
                second_hop: GainLaw::Fixed(g),
                ..
            } => SubLayerLaw::FixedSecondHop {
                ps: params.source_power,
                pr: params.relay_power,
                g_sq: *g,
                f_sq: f_sq.to_vec(),
            },
            ChannelModel::RateLaw(law) => SubLayerLaw::Rate(law.clone()),
        }
    }

    pub fn rayleigh(params: &SystemParams, f_sq: &[f64]) -> Self {
        SubLayerLaw::Rayleigh {
            ps: params.source_power,
            pr: params.relay_power,
            g_var: params.second_hop_var,
            f_sq: f_sq.to_vec(),
        }
    }

    /// Supremum of the rate support.
    pub fn saturation(&self) -> f64 {
        match self {
            SubLayerLaw::Rayleigh { ps, f_sq, .. } => f_sq
                .iter()
                .map(|&f| rate_saturation(*ps, f))
                .fold(0.0, f64::max),
            SubLayerLaw::FixedSecondHop { ps, pr, g_sq, f_sq } => f_sq
                .iter()
                .map(|&f| af_rate(*ps, *pr, f, *g_sq))
                .fold(0.0, f64::max),
            SubLayerLaw::Rate(law) => law.max_rate(),
        }
    }

    /// `P(R_m >= t)`.
    pub fn tail_prob(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self {
            SubLayerLaw::Rayleigh {
                ps,
                pr,
                g_var,
                f_sq,
            } => {
                let sum: f64 = f_sq
                    .iter()
                    .map(|&f| relay_tail(*ps, *pr, *g_var, f, t))
                    .sum();
                sum / f_sq.len() as f64
            }
            SubLayerLaw::FixedSecondHop { ps, pr, g_sq, f_sq } => {
                let hits = f_sq
                    .iter()
                    .filter(|&&f| af_rate(*ps, *pr, f, *g_sq) >= t)
                    .count();
                hits as f64 / f_sq.len() as f64
            }
            SubLayerLaw::Rate(law) => law.atoms().filter(|&(r, _)| r >= t).map(|(_, p)| p).sum(),
        }
    }

    /// `E[max(R_m - t, 0)]`, any real `t`.
    pub fn expected_positive_part(&self, t: f64, quad: &GaussLegendre) -> f64 {
        match self {
            SubLayerLaw::Rayleigh {
                ps,
                pr,
                g_var,
                f_sq,
            } => {
                if t < 0.0 {
                    return self.expected_positive_part(0.0, quad) - t;
                }
                let sum: f64 = f_sq
                    .iter()
                    .map(|&f| {
                        let sat = rate_saturation(*ps, f);
                        if t >= sat {
                            0.0
                        } else {
                            quad.integrate(t, sat, |u| relay_tail(*ps, *pr, *g_var, f, u))
                        }
                    })
                    .sum();
                sum / f_sq.len() as f64
            }
            SubLayerLaw::FixedSecondHop { ps, pr, g_sq, f_sq } => {
                let sum: f64 = f_sq
                    .iter()
                    .map(|&f| (af_rate(*ps, *pr, f, *g_sq) - t).max(0.0))
                    .sum();
                sum / f_sq.len() as f64
            }
            SubLayerLaw::Rate(law) => law.atoms().map(|(r, p)| p * (r - t).max(0.0)).sum(),
        }
    }

    /// Rate seen by `relay` (0-based) in one sub-layer observation.
    pub fn sample_rate<R: Rng + ?Sized>(&self, rng: &mut R, relay: usize) -> f64 {
        match self {
            SubLayerLaw::Rayleigh {
                ps,
                pr,
                g_var,
                f_sq,
            } => {
                let e: f64 = Exp1.sample(rng);
                af_rate(*ps, *pr, f_sq[relay], e * g_var)
            }
            SubLayerLaw::FixedSecondHop { ps, pr, g_sq, f_sq } => {
                af_rate(*ps, *pr, f_sq[relay], *g_sq)
            }
            SubLayerLaw::Rate(law) => law.sample(rng),
        }
    }

    /// Throughput-maximizing sub-layer rule (the intuitive rule's inner
    /// problem): `E[max(R_m - l, 0)] = l tau / (T p_r)`.
    pub fn solve_intuitive(
        &self,
        params: &SystemParams,
        quad: &GaussLegendre,
        tol: f64,
        max_iter: usize,
    ) -> Result<SubLayerStats> {
        let pr_succ = relay_success(params)?;
        let half = 0.5 * params.data_time;
        let sat = self.saturation();
        if sat <= 0.0 {
            return Ok(SubLayerStats {
                lambda_sub: 0.0,
                r1: 0.0,
                r2: half + params.slot / (2.0 * pr_succ),
                p_stop: 1.0,
                residual: 0.0,
            });
        }
        let cost = params.slot / (params.data_time * pr_succ);
        let sol = solve_decreasing(
            "sub-layer throughput",
            |l| {
                let f = self.expected_positive_part(l, quad) - cost * l;
                (f, Some(-self.tail_prob(l) - cost))
            },
            0.0,
            sat,
            Some(0.0),
            tol,
            max_iter,
        )?;
        let lambda_sub = sol.value;
        let p_stop = self.tail_prob(lambda_sub);
        let r2 = half + params.slot / (2.0 * pr_succ * p_stop);
        Ok(SubLayerStats {
            lambda_sub,
            r1: lambda_sub * r2,
            r2,
            p_stop,
            residual: sol.residual,
        })
    }

    /// Reward-maximizing sub-layer rule at main-layer rate `gamma`:
    /// `E[max((T/2)(R_m - gamma) - W, 0)] = gamma tau / (2 p_r)`.
    ///
    /// `start` is an optional initial guess for `W`.
    pub fn solve_w(
        &self,
        params: &SystemParams,
        gamma: f64,
        quad: &GaussLegendre,
        tol: f64,
        max_iter: usize,
        start: Option<f64>,
    ) -> Result<SubLayerW> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::param(
                "gamma",
                format!("must be finite and >= 0, got {gamma}"),
            ));
        }
        let pr_succ = relay_success(params)?;
        let half = 0.5 * params.data_time;
        let target = gamma * params.slot / (2.0 * pr_succ);
        let sat = self.saturation();

        if gamma == 0.0 {
            // Waiting is free: W* is the essential supremum of the reward.
            let w = half * sat;
            let residual = half * self.expected_positive_part(sat, quad);
            return Ok(SubLayerW {
                solution: ThresholdSolution::exact(w, residual),
                rate_threshold: sat,
                p_stop: self.tail_prob(sat),
            });
        }

        let mean = self.expected_positive_part(0.0, quad);
        if half * mean <= target {
            // Root lies where every observation stops and the equation is linear.
            let theta = mean - target / half;
            let w = half * (theta - gamma);
            let residual = half * self.expected_positive_part(theta, quad) - target;
            return Ok(SubLayerW {
                solution: ThresholdSolution::exact(w, residual),
                rate_threshold: theta,
                p_stop: 1.0,
            });
        }

        let lo = -half * gamma;
        let hi = half * (sat - gamma);
        let solution = solve_decreasing(
            "sub-layer W",
            |w| {
                let theta = gamma + w / half;
                let f = half * self.expected_positive_part(theta, quad) - target;
                (f, Some(-self.tail_prob(theta)))
            },
            lo,
            hi,
            Some(start.unwrap_or(lo)),
            tol,
            max_iter,
        )?;
        let rate_threshold = gamma + solution.value / half;
        Ok(SubLayerW {
            solution,
            rate_threshold,
            p_stop: self.tail_prob(rate_threshold),
        })
    }
}

fn relay_success(params: &SystemParams) -> Result<f64> {
    let p = params.relay_success();
    if p > 0.0 {
        Ok(p)
    } else {
        Err(Error::NonTerminatingContention(format!(
            "relay contention with L = {} and p1 = {} never succeeds",
            params.relays, params.p1
        )))
    }
}

/// `P(rate_j >= t)` for one relay with first-hop gain `f`.
fn relay_tail(ps: f64, pr: f64, g_var: f64, f: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    let a = ps * f.min(GAIN_CAP);
    let v = (t * std::f64::consts::LN_2).exp_m1();
    if v >= a {
        return 0.0;
    }
    let x = v * (1.0 + a) / (pr * (a - v));
    (-x / g_var).exp()
}

/// `P(R_m >= threshold)` for Rayleigh second hops.
pub fn sub_layer_tail_prob(params: &SystemParams, f_sq: &[f64], threshold: f64) -> f64 {
    SubLayerLaw::rayleigh(params, f_sq).tail_prob(threshold)
}

/// `E[max(R_m - lambda, 0)]` for Rayleigh second hops.
pub fn sub_layer_expected_positive_part(
    params: &SystemParams,
    f_sq: &[f64],
    lambda: f64,
    est: &EstimatorConfig,
) -> f64 {
    SubLayerLaw::rayleigh(params, f_sq).expected_positive_part(lambda, &est.quadrature())
}

pub fn solve_sub_layer_intuitive(
    params: &SystemParams,
    law: &SubLayerLaw,
    est: &EstimatorConfig,
) -> Result<SubLayerStats> {
    law.solve_intuitive(params, &est.quadrature(), est.tol, est.max_iter)
}

pub fn solve_sub_w(
    params: &SystemParams,
    law: &SubLayerLaw,
    gamma: f64,
    est: &EstimatorConfig,
) -> Result<ThresholdSolution> {
    Ok(law
        .solve_w(
            params,
            gamma,
            &est.quadrature(),
            est.tol,
            est.max_iter,
            None,
        )?
        .solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::stream_rng;
    use approx::assert_abs_diff_eq;

    fn unit_params(relays: usize) -> SystemParams {
        SystemParams {
            relays,
            source_power: 1.0,
            relay_power: 1.0,
            second_hop_var: 1.0,
            ..SystemParams::default()
        }
    }

    #[test]
    fn tail_examples() {
        let p = unit_params(1);
        assert_eq!(sub_layer_tail_prob(&p, &[3.0], 0.0), 1.0);
        assert_eq!(sub_layer_tail_prob(&p, &[3.0], 2.0), 0.0);
        assert_eq!(sub_layer_tail_prob(&p, &[3.0], 2.5), 0.0);
        assert_abs_diff_eq!(
            sub_layer_tail_prob(&p, &[3.0], 1.0),
            (-2.0f64).exp(),
            epsilon = 1e-14
        );
        let p2 = unit_params(2);
        assert_eq!(sub_layer_tail_prob(&p2, &[1.0, 0.5], 1.0), 0.0);
    }

    #[test]
    fn tail_matches_sampling() {
        let p = SystemParams {
            relays: 3,
            relay_power: 2.0,
            second_hop_var: 0.7,
            ..unit_params(3)
        };
        let f = [0.4, 2.0, 5.0];
        let law = SubLayerLaw::rayleigh(&p, &f);
        let mut rng = stream_rng(9, 0);
        let n = 400_000;
        let t = 1.1;
        let hits = (0..n)
            .filter(|i| law.sample_rate(&mut rng, i % 3) >= t)
            .count() as f64
            / n as f64;
        assert!(
            (hits - law.tail_prob(t)).abs() < 0.003,
            "{hits} vs {}",
            law.tail_prob(t)
        );
    }

    #[test]
    fn positive_part_edges() {
        let p = unit_params(2);
        let est = EstimatorConfig::default();
        let f = [1.0, 3.0];
        assert_eq!(sub_layer_expected_positive_part(&p, &f, 2.0, &est), 0.0);
        let law = SubLayerLaw::rayleigh(&p, &f);
        let q = est.quadrature();
        let s0 = law.expected_positive_part(0.0, &q);
        assert_abs_diff_eq!(
            law.expected_positive_part(-0.5, &q),
            s0 + 0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn fixed_g_hook_is_constant_rate() {
        let p = unit_params(1);
        let law = SubLayerLaw::new(&p, &ChannelModel::fixed(1.0, 1.0), &[1.0]);
        let q = GaussLegendre::new(64);
        let r = (4.0f64 / 3.0).log2();
        for l in [0.0, 0.1, 0.3, 0.415, 0.5] {
            assert_abs_diff_eq!(
                law.expected_positive_part(l, &q),
                (r - l).max(0.0),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn quadrature_converged() {
        // 64 and 512 nodes agree, so the default rule is resolved
        let p = SystemParams {
            relays: 2,
            source_power: 10.0,
            relay_power: 0.3,
            second_hop_var: 0.5,
            ..unit_params(2)
        };
        let law = SubLayerLaw::rayleigh(&p, &[0.05, 4.0]);
        for t in [0.0, 0.2, 1.0, 3.0] {
            let a = law.expected_positive_part(t, &GaussLegendre::new(64));
            let b = law.expected_positive_part(t, &GaussLegendre::new(512));
            assert!((a - b).abs() <= 1e-9 * b.max(1e-3), "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn intuitive_degenerate_first_hop() {
        let p = SystemParams {
            p1: 0.5,
            ..unit_params(2)
        };
        let est = EstimatorConfig::default();
        let law = SubLayerLaw::rayleigh(&p, &[0.0, 0.0]);
        let stats = solve_sub_layer_intuitive(&p, &law, &est).unwrap();
        assert_eq!(stats.lambda_sub, 0.0);
        assert_eq!(stats.p_stop, 1.0);
        assert_eq!(stats.r1, 0.0);
        assert_abs_diff_eq!(stats.r2, 0.5 + 0.1 / (2.0 * 0.5), epsilon = 1e-15);
    }

    #[test]
    fn intuitive_constant_rate_closed_form() {
        let p = SystemParams {
            relays: 1,
            p1: 0.5,
            slot: 0.2,
            data_time: 2.0,
            ..unit_params(1)
        };
        let law = SubLayerLaw::Rate(RateLaw::constant(1.0).unwrap());
        let stats = solve_sub_layer_intuitive(&p, &law, &EstimatorConfig::default()).unwrap();
        assert_abs_diff_eq!(stats.lambda_sub, 1.0 / 1.2, epsilon = 1e-9);
        assert_eq!(stats.p_stop, 1.0);
        assert_abs_diff_eq!(stats.r2, 1.2, epsilon = 1e-12);
        assert_abs_diff_eq!(stats.r1, 1.0, epsilon = 1e-9);
        assert_eq!(stats.r1, stats.lambda_sub * stats.r2);
    }

    #[test]
    fn intuitive_rayleigh_contract() {
        let p = SystemParams::default();
        let est = EstimatorConfig::default();
        for f in [[0.1, 0.2], [1.0, 3.0], [7.0, 0.0]] {
            let law = SubLayerLaw::rayleigh(&p, &f);
            let stats = solve_sub_layer_intuitive(&p, &law, &est).unwrap();
            assert!(stats.residual.abs() <= est.tol);
            assert!(stats.lambda_sub < law.saturation());
            assert!(stats.r2 >= p.data_time / 2.0);
            assert_eq!(stats.r1, stats.lambda_sub * stats.r2);
        }
    }

    #[test]
    fn w_constant_rate_closed_form() {
        let p = SystemParams {
            relays: 1,
            p1: 0.5,
            slot: 0.2,
            data_time: 2.0,
            ..unit_params(1)
        };
        let law = SubLayerLaw::Rate(RateLaw::constant(1.0).unwrap());
        let sol = solve_sub_w(&p, &law, 0.4, &EstimatorConfig::default()).unwrap();
        assert_abs_diff_eq!(sol.value, 0.52, epsilon = 1e-9);
    }

    #[test]
    fn w_at_zero_gamma_is_reward_supremum() {
        let p = unit_params(2);
        let law = SubLayerLaw::rayleigh(&p, &[1.0, 3.0]);
        let w = law
            .solve_w(&p, 0.0, &GaussLegendre::new(64), 1e-9, 200, None)
            .unwrap();
        assert_abs_diff_eq!(w.solution.value, 0.5 * p.data_time * 2.0, epsilon = 1e-12);
        assert!(w.solution.residual.abs() <= 1e-9);
    }

    #[test]
    fn w_all_zero_first_hop() {
        // rate is identically zero: max(-(T/2) g - W, 0) = g tau / (2 p_r)
        let p = SystemParams {
            p1: 0.5,
            slot: 0.2,
            data_time: 2.0,
            ..unit_params(2)
        };
        let law = SubLayerLaw::rayleigh(&p, &[0.0, 0.0]);
        let gamma = 0.4;
        let sol = solve_sub_w(&p, &law, gamma, &EstimatorConfig::default()).unwrap();
        let expected = -gamma - gamma * 0.2 / (2.0 * 0.5);
        assert_abs_diff_eq!(sol.value, expected, epsilon = 1e-12);
        // direct substitution into the fixed-point equation
        let lhs = (-(p.data_time / 2.0) * gamma).max(sol.value) - sol.value;
        assert_abs_diff_eq!(lhs, gamma * 0.2 / (2.0 * 0.5), epsilon = 1e-12);
    }

    #[test]
    fn w_rejects_negative_gamma() {
        let p = unit_params(1);
        let law = SubLayerLaw::rayleigh(&p, &[1.0]);
        assert!(solve_sub_w(&p, &law, -0.1, &EstimatorConfig::default()).is_err());
    }

    #[test]
    fn w_contract_and_monotone_in_gamma() {
        let p = SystemParams::default();
        let q = GaussLegendre::new(64);
        let law = SubLayerLaw::rayleigh(&p, &[0.3, 1.7]);
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let gamma = 0.05 * k as f64;
            let w = law.solve_w(&p, gamma, &q, 1e-9, 200, None).unwrap();
            assert!(w.solution.residual.abs() <= 1e-9, "gamma {gamma}");
            let (lo, hi) = w.solution.bracket;
            assert!(hi - lo <= 1e-9 * w.solution.value.abs().max(1.0));
            assert!(w.solution.value <= prev + 1e-12);
            prev = w.solution.value;
        }
    }
}
