//! Channel gains and achievable rates for amplify-and-forward relaying.
//!
//! Gains are always handled as squared magnitudes. For a zero-mean complex
//! Gaussian coefficient with variance `v`, `|h|^2` is exponential with mean
//! `v`, so the phase never needs to be drawn.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::contention::success_prob;
use crate::error::{Error, Result};

/// Squared gains are clamped here before entering the rate formula.
pub const GAIN_CAP: f64 = 1e300;

/// Protocol and channel constants shared by every scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    /// Number of source-destination pairs.
    #[serde(rename = "K")]
    pub sources: usize,
    /// Number of relays.
    #[serde(rename = "L")]
    pub relays: usize,
    /// Source transmit power (SNR scale).
    #[serde(rename = "ps")]
    pub source_power: f64,
    /// Relay transmit power (SNR scale).
    #[serde(rename = "pr")]
    pub relay_power: f64,
    /// Mean of the first-hop squared gain.
    #[serde(rename = "sigma_f_sq")]
    pub first_hop_var: f64,
    /// Mean of the second-hop squared gain.
    #[serde(rename = "sigma_g_sq")]
    pub second_hop_var: f64,
    /// Contention slot duration.
    #[serde(rename = "tau")]
    pub slot: f64,
    /// Total data transmission time, split evenly between the two hops.
    #[serde(rename = "T")]
    pub data_time: f64,
    /// Per-slot source contention probability.
    pub p0: f64,
    /// Per-slot relay contention probability.
    pub p1: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            sources: 4,
            relays: 2,
            source_power: 10.0,
            relay_power: 10.0,
            first_hop_var: 1.0,
            second_hop_var: 1.0,
            slot: 0.1,
            data_time: 1.0,
            p0: 0.25,
            p1: 0.5,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        if self.sources == 0 {
            return Err(Error::param("K", "must be at least 1"));
        }
        if self.relays == 0 {
            return Err(Error::param("L", "must be at least 1"));
        }
        let positive = [
            ("ps", self.source_power),
            ("pr", self.relay_power),
            ("sigma_f_sq", self.first_hop_var),
            ("sigma_g_sq", self.second_hop_var),
            ("tau", self.slot),
            ("T", self.data_time),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be finite and > 0, got {value}"),
                ));
            }
        }
        check_access_prob("p0", self.p0, self.sources)?;
        check_access_prob("p1", self.p1, self.relays)?;
        Ok(())
    }

    /// Probability that a source contention slot has exactly one contender.
    pub fn source_success(&self) -> f64 {
        success_prob(self.sources, self.p0).unwrap_or(0.0)
    }

    /// Probability that a relay contention slot has exactly one contender.
    pub fn relay_success(&self) -> f64 {
        success_prob(self.relays, self.p1).unwrap_or(0.0)
    }
}

fn check_access_prob(name: &'static str, p: f64, contenders: usize) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param(name, format!("must lie in (0, 1], got {p}")));
    }
    if p == 1.0 && contenders > 1 {
        return Err(Error::param(
            name,
            format!("1.0 with {contenders} contenders means every slot collides"),
        ));
    }
    Ok(())
}

/// Distribution of one squared channel gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainLaw {
    /// Exponential with the hop's configured mean.
    Rayleigh,
    /// Every draw equals this value.
    Fixed(f64),
}

/// A finite probability law over end-to-end rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateLawRepr", into = "RateLawRepr")]
pub struct RateLaw {
    rates: Vec<f64>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RateLawRepr {
    rates: Vec<f64>,
    probs: Vec<f64>,
}

impl TryFrom<RateLawRepr> for RateLaw {
    type Error = Error;

    fn try_from(repr: RateLawRepr) -> Result<Self> {
        RateLaw::new(repr.rates, repr.probs)
    }
}

impl From<RateLaw> for RateLawRepr {
    fn from(law: RateLaw) -> Self {
        RateLawRepr {
            rates: law.rates,
            probs: law.probs,
        }
    }
}

impl RateLaw {
    pub fn new(rates: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if rates.is_empty() || rates.len() != probs.len() {
            return Err(Error::param(
                "rate_law",
                "rates and probs must be non-empty and of equal length",
            ));
        }
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::param(
                "rate_law.rates",
                "rates must be finite and >= 0",
            ));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::param("rate_law.probs", "probabilities must be >= 0"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::param(
                "rate_law.probs",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        Ok(Self {
            rates,
            probs,
            cumulative,
        })
    }

    /// A point mass at `rate`.
    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(vec![rate], vec![1.0])
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.rates.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn max_rate(&self) -> f64 {
        self.atoms()
            .filter(|&(_, p)| p > 0.0)
            .map(|(r, _)| r)
            .fold(0.0, f64::max)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.rates.len() == 1 {
            return self.rates[0];
        }
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.rates[idx.min(self.rates.len() - 1)]
    }
}

/// How gains (or rates) are generated for each observation.
///
/// `Fading` with two Rayleigh hops is the physical model; the other shapes
/// are deterministic or finite-support hooks with closed-form answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelModel {
    Fading {
        first_hop: GainLaw,
        second_hop: GainLaw,
    },
    /// End-to-end rate drawn from a finite law; gains are not modelled.
    RateLaw(RateLaw),
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel::rayleigh()
    }
}

impl ChannelModel {
    pub fn rayleigh() -> Self {
        ChannelModel::Fading {
            first_hop: GainLaw::Rayleigh,
            second_hop: GainLaw::Rayleigh,
        }
    }

    pub fn fixed(f_sq: f64, g_sq: f64) -> Self {
        ChannelModel::Fading {
            first_hop: GainLaw::Fixed(f_sq),
            second_hop: GainLaw::Fixed(g_sq),
        }
    }

    pub fn constant_rate(rate: f64) -> Result<Self> {
        Ok(ChannelModel::RateLaw(RateLaw::constant(rate)?))
    }

    pub fn validate(&self) -> Result<()> {
        if let ChannelModel::Fading {
            first_hop,
            second_hop,
        } = self
        {
            for (name, law) in [
                ("channel.first_hop", first_hop),
                ("channel.second_hop", second_hop),
            ] {
                if let GainLaw::Fixed(v) = law {
                    if !(v.is_finite() && *v >= 0.0) {
                        return Err(Error::param(
                            name,
                            format!("fixed gain must be >= 0, got {v}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// True when first-hop gains carry no randomness.
    pub fn first_hop_is_deterministic(&self) -> bool {
        match self {
            ChannelModel::Fading { first_hop, .. } => matches!(first_hop, GainLaw::Fixed(_)),
            ChannelModel::RateLaw(_) => true,
        }
    }

    /// Fills `out` (length L) with one first-hop realization.
    pub fn draw_first_hop<R: Rng + ?Sized>(
        &self,
        params: &SystemParams,
        rng: &mut R,
        out: &mut [f64],
    ) {
        match self {
            ChannelModel::Fading { first_hop, .. } => {
                for f in out.iter_mut() {
                    *f = draw_gain(rng, *first_hop, params.first_hop_var);
                }
            }
            // The rate law ignores gains; zeros keep the vector well formed.
            ChannelModel::RateLaw(_) => out.fill(0.0),
        }
    }

    /// Draws a full-CSI observation and returns the best-relay rate and relay.
    pub fn draw_full_csi<R: Rng + ?Sized>(
        &self,
        params: &SystemParams,
        rng: &mut R,
    ) -> (f64, usize) {
        match self {
            ChannelModel::Fading {
                first_hop,
                second_hop,
            } => {
                let mut best = (0.0, 0);
                for j in 0..params.relays {
                    let f = draw_gain(rng, *first_hop, params.first_hop_var);
                    let g = draw_gain(rng, *second_hop, params.second_hop_var);
                    let r = af_rate(params.source_power, params.relay_power, f, g);
                    if r > best.0 {
                        best = (r, j);
                    }
                }
                best
            }
            ChannelModel::RateLaw(law) => (law.sample(rng), 0),
        }
    }
}

fn draw_gain<R: Rng + ?Sized>(rng: &mut R, law: GainLaw, variance: f64) -> f64 {
    match law {
        GainLaw::Rayleigh => {
            let e: f64 = Exp1.sample(rng);
            e * variance
        }
        GainLaw::Fixed(v) => v,
    }
}

/// Squared gains of one observation: first hop always, second hop when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub f_sq: Vec<f64>,
    pub g_sq: Option<Vec<f64>>,
}

impl ChannelRealization {
    pub fn new(f_sq: Vec<f64>, g_sq: Option<Vec<f64>>) -> Result<Self> {
        let ok = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if !ok(&f_sq) {
            return Err(Error::param("f_sq", "gains must be finite and >= 0"));
        }
        if let Some(g) = &g_sq {
            if g.len() != f_sq.len() {
                return Err(Error::param("g_sq", "must have the same length as f_sq"));
            }
            if !ok(g) {
                return Err(Error::param("g_sq", "gains must be finite and >= 0"));
            }
        }
        Ok(Self { f_sq, g_sq })
    }
}

/// One draw of `|h|^2` for a complex Gaussian `h` with the given variance.
pub fn sample_gain_sq<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Result<f64> {
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::param(
            "variance",
            format!("must be > 0, got {variance}"),
        ));
    }
    Ok(draw_gain(rng, GainLaw::Rayleigh, variance))
}

/// End-to-end AF rate in bits/s/Hz for one relay.
///
/// The SNR `ab/(1+a+b)` is evaluated as `1/(1/a + 1/b + 1/(ab))`, which
/// stays finite when either gain is huge.
pub fn af_rate(ps: f64, pr: f64, f_sq: f64, g_sq: f64) -> f64 {
    let a = ps * f_sq.min(GAIN_CAP);
    let b = pr * g_sq.min(GAIN_CAP);
    if a <= 0.0 || b <= 0.0 {
        return 0.0;
    }
    let snr = 1.0 / (1.0 / a + 1.0 / b + 1.0 / (a * b));
    snr.ln_1p() / std::f64::consts::LN_2
}

/// Supremum of [`af_rate`] as the second-hop gain grows without bound.
pub fn rate_saturation(ps: f64, f_sq: f64) -> f64 {
    (ps * f_sq.min(GAIN_CAP)).ln_1p() / std::f64::consts::LN_2
}

/// Best AF rate over all relays and its (0-based) relay index.
///
/// Ties go to the lowest index.
pub fn best_relay_rate(params: &SystemParams, ch: &ChannelRealization) -> Result<(f64, usize)> {
    let g_sq = ch.g_sq.as_ref().ok_or_else(|| {
        Error::InvalidState("second-hop gains are required for relay selection".into())
    })?;
    if ch.f_sq.len() != params.relays || g_sq.len() != params.relays {
        return Err(Error::InvalidState(format!(
            "expected {} gains per hop, got {} and {}",
            params.relays,
            ch.f_sq.len(),
            g_sq.len()
        )));
    }
    let mut best = (0.0, 0);
    for (j, (&f, &g)) in ch.f_sq.iter().zip(g_sq).enumerate() {
        let r = af_rate(params.source_power, params.relay_power, f, g);
        if r > best.0 {
            best = (r, j);
        }
    }
    Ok(best)
}

/// Random stream `stream` of the generator family rooted at `seed`.
///
/// Realization `i` of a Monte Carlo sample set always reads stream `i`, so
/// the same realization is reproduced whatever the sample size.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn af_rate_examples() {
        assert_eq!(af_rate(1.0, 1.0, 0.0, 5.0), 0.0);
        assert_abs_diff_eq!(
            af_rate(1.0, 1.0, 1.0, 1.0),
            (4.0f64 / 3.0).log2(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(af_rate(1.0, 1.0, 1.0, 1.0), 0.415037, epsilon = 1e-6);
        assert_abs_diff_eq!(af_rate(1.0, 1.0, 3.0, 1e12), 2.0, epsilon = 1e-6);
    }

    #[test]
    fn af_rate_survives_huge_gains() {
        let r = af_rate(1.0, 1.0, 1e308, 1e308);
        assert!(r.is_finite() && r > 990.0);
    }

    #[test]
    fn saturation_examples() {
        assert_eq!(rate_saturation(1.0, 0.0), 0.0);
        assert_abs_diff_eq!(rate_saturation(1.0, 3.0), 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rate_saturation(2.0, 1.5), 2.0, epsilon = 1e-15);
    }

    fn params(l: usize) -> SystemParams {
        SystemParams {
            relays: l,
            source_power: 1.0,
            relay_power: 1.0,
            ..SystemParams::default()
        }
    }

    #[test]
    fn best_relay_examples() {
        let ch = ChannelRealization::new(vec![1.0], Some(vec![1.0])).unwrap();
        let (r, j) = best_relay_rate(&params(1), &ch).unwrap();
        assert_abs_diff_eq!(r, 0.415037, epsilon = 1e-6);
        assert_eq!(j, 0);

        let ch = ChannelRealization::new(vec![1.0, 3.0], Some(vec![1.0, 1e12])).unwrap();
        let (r, j) = best_relay_rate(&params(2), &ch).unwrap();
        assert_abs_diff_eq!(r, 2.0, epsilon = 1e-6);
        assert_eq!(j, 1);

        let ch = ChannelRealization::new(vec![0.0; 3], Some(vec![0.0; 3])).unwrap();
        assert_eq!(best_relay_rate(&params(3), &ch).unwrap(), (0.0, 0));
    }

    #[test]
    fn best_relay_needs_second_hop() {
        let ch = ChannelRealization::new(vec![1.0, 2.0], None).unwrap();
        assert!(matches!(
            best_relay_rate(&params(2), &ch),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn realization_rejects_negative_gain() {
        assert!(ChannelRealization::new(vec![-1.0], None).is_err());
        assert!(ChannelRealization::new(vec![1.0], Some(vec![1.0, 2.0])).is_err());
    }

    #[test]
    fn gain_sampler_rejects_bad_variance() {
        let mut rng = stream_rng(1, 0);
        assert!(sample_gain_sq(&mut rng, 0.0).is_err());
        assert!(sample_gain_sq(&mut rng, -2.0).is_err());
        assert!(sample_gain_sq(&mut rng, 1.0).unwrap() >= 0.0);
    }

    #[test]
    fn gain_sampler_moments() {
        let mut rng = stream_rng(11, 0);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| sample_gain_sq(&mut rng, 2.0).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.0).abs() < 0.01, "mean {mean}");

        let tail = (0..n)
            .filter(|_| sample_gain_sq(&mut rng, 1.0).unwrap() > 1.0)
            .count() as f64
            / n as f64;
        assert!((tail - (-1.0f64).exp()).abs() < 0.003, "tail {tail}");
    }

    #[test]
    fn params_validation_names_field() {
        let p = SystemParams {
            p0: 1.0,
            ..SystemParams::default()
        };
        match p.validate() {
            Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "p0"),
            other => panic!("unexpected {other:?}"),
        }
        let p = SystemParams {
            sources: 1,
            p0: 1.0,
            ..SystemParams::default()
        };
        assert!(p.validate().is_ok());
        let p = SystemParams {
            slot: 0.0,
            ..SystemParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn rate_law_sampling_matches_probabilities() {
        let law = RateLaw::new(vec![0.0, 2.0], vec![0.25, 0.75]).unwrap();
        let mut rng = stream_rng(3, 0);
        let n = 200_000;
        let hits = (0..n).filter(|_| law.sample(&mut rng) == 2.0).count() as f64 / n as f64;
        assert!((hits - 0.75).abs() < 0.005);
        assert!(RateLaw::new(vec![1.0], vec![0.5]).is_err());
    }

    #[test]
    fn bound_on_mean_best_rate() {
        // E[max_j rate] <= L ps pr sf sg / ln 2
        let p = SystemParams {
            relays: 3,
            source_power: 2.0,
            relay_power: 0.5,
            ..SystemParams::default()
        };
        let model = ChannelModel::rayleigh();
        let mut rng = stream_rng(5, 0);
        let n = 200_000;
        let mean = (0..n)
            .map(|_| model.draw_full_csi(&p, &mut rng).0)
            .sum::<f64>()
            / n as f64;
        let bound = 3.0 * 2.0 * 0.5 / std::f64::consts::LN_2;
        assert!(mean <= bound, "{mean} > {bound}");
    }

    proptest! {
        #[test]
        fn linear_bound(x in 0.0f64..50.0, y in 0.0f64..50.0) {
            prop_assert!(af_rate(1.0, 1.0, x, y) <= x * y / std::f64::consts::LN_2 + 1e-15);
        }

        #[test]
        fn swap_symmetry(ps in 0.01f64..100.0, pr in 0.01f64..100.0, x in 0.0f64..20.0, y in 0.0f64..20.0) {
            let a = af_rate(ps, pr, x, y);
            let b = af_rate(pr, ps, y, x);
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn monotone_in_each_gain(x in 0.0f64..20.0, y in 0.01f64..20.0, dx in 0.0f64..5.0, dy in 0.0f64..5.0) {
            prop_assert!(af_rate(2.0, 3.0, x + dx, y) >= af_rate(2.0, 3.0, x, y));
            prop_assert!(af_rate(2.0, 3.0, x, y + dy) >= af_rate(2.0, 3.0, x, y));
        }

        #[test]
        fn below_saturation(ps in 0.01f64..100.0, x in 0.0f64..20.0, y in 0.0f64..1e6) {
            prop_assert!(af_rate(ps, 1.0, x, y) <= rate_saturation(ps, x));
            if x > 0.0 && y > 0.0 && y < 1e3 {
                prop_assert!(af_rate(ps, 1.0, x, y) < rate_saturation(ps, x));
            }
        }
    }
}
