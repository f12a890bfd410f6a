//! Full-CSI scenario: the winner knows both hops and stops when its best
//! relay rate reaches `2 lambda*`, where `lambda*` solves
//! `E[max((T/2) R - lambda T, 0)] = lambda tau / p_s`.

use super::roots::{bisect_decreasing, bracket_from_zero};
use super::{EstimatorConfig, ThresholdSolution};
use crate::channel::{af_rate, stream_rng, ChannelModel, GainLaw, SystemParams};
use crate::error::{Error, Result};

/// A weighted, sorted set of end-to-end rates standing in for the law of `R`.
///
/// Monte Carlo draws carry equal weights; finite-support hooks are stored
/// exactly. Suffix sums make every tail functional an `O(log n)` lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSample {
    rates: Vec<f64>,
    tail_weight: Vec<f64>,
    tail_moment: Vec<f64>,
}

impl RateSample {
    pub fn from_atoms(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = atoms.len();
        let mut tail_weight = vec![0.0; n + 1];
        let mut tail_moment = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let (r, w) = atoms[i];
            tail_weight[i] = tail_weight[i + 1] + w;
            tail_moment[i] = tail_moment[i + 1] + w * r;
        }
        Self {
            rates: atoms.into_iter().map(|(r, _)| r).collect(),
            tail_weight,
            tail_moment,
        }
    }

    pub fn from_draws(draws: Vec<f64>) -> Self {
        let w = 1.0 / draws.len() as f64;
        Self::from_atoms(draws.into_iter().map(|r| (r, w)).collect())
    }

    /// The fixed sample set used by every full-CSI evaluation.
    ///
    /// Realization `i` reads random stream `i` of `est.seed`, drawing
    /// `(f_1, g_1, f_2, g_2, ...)`, so the first `L'` relays of a realization
    /// do not depend on `L`.
    pub fn draw(
        params: &SystemParams,
        model: &ChannelModel,
        est: &EstimatorConfig,
    ) -> Result<Self> {
        params.validate()?;
        model.validate()?;
        est.validate()?;
        match model {
            ChannelModel::RateLaw(law) => Ok(Self::from_atoms(law.atoms().collect())),
            ChannelModel::Fading {
                first_hop: GainLaw::Fixed(f),
                second_hop: GainLaw::Fixed(g),
            } => Ok(Self::from_atoms(vec![(
                af_rate(params.source_power, params.relay_power, *f, *g),
                1.0,
            )])),
            ChannelModel::Fading { .. } => {
                let draws = (0..est.mc_samples as u64)
                    .map(|i| {
                        let mut rng = stream_rng(est.seed, i);
                        model.draw_full_csi(params, &mut rng).0
                    })
                    .collect();
                Ok(Self::from_draws(draws))
            }
        }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// Sorted support points.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    fn first_at_or_above(&self, theta: f64) -> usize {
        self.rates.partition_point(|&r| r < theta)
    }

    /// `P(R >= theta)`.
    pub fn tail(&self, theta: f64) -> f64 {
        self.tail_weight[self.first_at_or_above(theta)]
    }

    /// `E[R 1{R >= theta}]`.
    pub fn partial_mean(&self, theta: f64) -> f64 {
        self.tail_moment[self.first_at_or_above(theta)]
    }

    /// `E[max(R - theta, 0)]`.
    pub fn positive_part(&self, theta: f64) -> f64 {
        let i = self.first_at_or_above(theta);
        (self.tail_moment[i] - theta * self.tail_weight[i]).max(0.0)
    }

    /// `P(R <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let i = self.rates.partition_point(|&r| r <= x);
        (self.tail_weight[0] - self.tail_weight[i]).clamp(0.0, 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.tail_moment[0]
    }

    pub fn max(&self) -> f64 {
        self.rates.last().copied().unwrap_or(0.0)
    }
}

/// `E[max((T/2) R - lambda T, 0)]` over the sample set.
pub fn expected_positive_part_full_csi(
    params: &SystemParams,
    sample: &RateSample,
    lambda: f64,
) -> f64 {
    0.5 * params.data_time * sample.positive_part(2.0 * lambda)
}

/// Residual `G(lambda)` of the full-CSI threshold equation.
pub fn full_csi_residual(params: &SystemParams, sample: &RateSample, lambda: f64) -> f64 {
    expected_positive_part_full_csi(params, sample, lambda)
        - lambda * params.slot / params.source_success()
}

/// Maximal full-CSI throughput `lambda*`; the rate threshold is `2 lambda*`.
pub fn solve_full_csi_lambda(
    params: &SystemParams,
    sample: &RateSample,
    est: &EstimatorConfig,
) -> Result<ThresholdSolution> {
    est.validate()?;
    if params.source_success() <= 0.0 {
        return Err(Error::NonTerminatingContention(format!(
            "source contention with K = {} and p0 = {} never succeeds",
            params.sources, params.p0
        )));
    }
    let g = |l: f64| full_csi_residual(params, sample, l);
    match bracket_from_zero("full-CSI lambda", g, est.max_iter)? {
        None => Ok(ThresholdSolution::exact(0.0, g(0.0))),
        Some((lo, hi)) => bisect_decreasing("full-CSI lambda", g, lo, hi, est.tol, est.max_iter),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::RateLaw;
    use approx::assert_abs_diff_eq;

    fn hook_params() -> SystemParams {
        // T = 2 and tau / p_s = 0.2
        SystemParams {
            sources: 2,
            p0: 0.5,
            slot: 0.1,
            data_time: 2.0,
            ..SystemParams::default()
        }
    }

    #[test]
    fn positive_part_at_zero_is_half_t_times_mean() {
        let p = SystemParams::default();
        let est = EstimatorConfig {
            mc_samples: 10_000,
            ..Default::default()
        };
        let s = RateSample::draw(&p, &ChannelModel::rayleigh(), &est).unwrap();
        let mean = s.rates().iter().sum::<f64>() / s.len() as f64;
        assert_abs_diff_eq!(
            expected_positive_part_full_csi(&p, &s, 0.0),
            0.5 * p.data_time * mean,
            epsilon = 1e-12
        );
        assert_eq!(expected_positive_part_full_csi(&p, &s, 0.5 * s.max()), 0.0);
        assert_eq!(expected_positive_part_full_csi(&p, &s, s.max()), 0.0);
    }

    #[test]
    fn point_mass_positive_part() {
        let p = SystemParams {
            data_time: 2.0,
            ..SystemParams::default()
        };
        let s = RateSample::from_atoms(vec![(1.0, 1.0)]);
        assert_abs_diff_eq!(
            expected_positive_part_full_csi(&p, &s, 0.25),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn constant_rate_closed_form() {
        let p = hook_params();
        assert_abs_diff_eq!(p.slot / p.source_success(), 0.2, epsilon = 1e-15);
        let model = ChannelModel::constant_rate(1.0).unwrap();
        let est = EstimatorConfig::default();
        let s = RateSample::draw(&p, &model, &est).unwrap();
        let sol = solve_full_csi_lambda(&p, &s, &est).unwrap();
        assert_abs_diff_eq!(sol.value, 1.0 / 2.2, epsilon = 1e-9);
    }

    #[test]
    fn two_point_closed_form() {
        let p = hook_params();
        let model = ChannelModel::RateLaw(RateLaw::new(vec![0.0, 2.0], vec![0.5, 0.5]).unwrap());
        let est = EstimatorConfig::default();
        let s = RateSample::draw(&p, &model, &est).unwrap();
        let sol = solve_full_csi_lambda(&p, &s, &est).unwrap();
        assert_abs_diff_eq!(sol.value, 1.0 / 1.2, epsilon = 1e-9);
    }

    #[test]
    fn zero_rate_gives_zero_lambda() {
        let p = hook_params();
        let s = RateSample::from_atoms(vec![(0.0, 1.0)]);
        let sol = solve_full_csi_lambda(&p, &s, &EstimatorConfig::default()).unwrap();
        assert_eq!(sol.value, 0.0);
    }

    #[test]
    fn sample_functionals() {
        let s = RateSample::from_draws(vec![3.0, 1.0, 2.0, 2.0]);
        assert_eq!(s.rates(), &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(s.tail(2.0), 0.75);
        assert_eq!(s.cdf(2.0), 0.75);
        assert_eq!(s.cdf(0.5), 0.0);
        assert_eq!(s.partial_mean(2.5), 0.75);
        assert_abs_diff_eq!(
            s.positive_part(1.5),
            (0.5 + 0.5 + 1.5) / 4.0,
            epsilon = 1e-15
        );
        assert_eq!(s.mean(), 2.0);
    }

    #[test]
    fn rayleigh_solution_contract() {
        let p = SystemParams::default();
        let est = EstimatorConfig {
            mc_samples: 20_000,
            ..Default::default()
        };
        let s = RateSample::draw(&p, &ChannelModel::rayleigh(), &est).unwrap();
        let sol = solve_full_csi_lambda(&p, &s, &est).unwrap();
        assert!(sol.residual.abs() <= est.tol);
        assert!(sol.bracket.1 - sol.bracket.0 <= est.tol * sol.value.max(1.0));
        assert!(sol.value > 0.0);
    }

    #[test]
    fn sample_set_prefix_property() {
        // more relays can only raise each realization's best rate
        let est = EstimatorConfig {
            mc_samples: 2_000,
            ..Default::default()
        };
        let one = RateSample::draw(
            &SystemParams {
                relays: 1,
                ..Default::default()
            },
            &ChannelModel::rayleigh(),
            &est,
        )
        .unwrap();
        let two = RateSample::draw(
            &SystemParams {
                relays: 2,
                ..Default::default()
            },
            &ChannelModel::rayleigh(),
            &est,
        )
        .unwrap();
        assert!(two.mean() >= one.mean());
        for theta in [0.5, 1.0, 2.0, 3.0] {
            assert!(two.tail(theta) >= one.tail(theta));
        }
    }
}
