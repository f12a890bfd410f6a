//! Slot-level protocol simulation.
//!
//! Packet `i` draws all of its randomness from its own stream, so runs are
//! reproducible and two policies simulated with the same seed see the same
//! observation sequence for every packet until their decisions diverge.

use serde::{Deserialize, Serialize};

use crate::channel::{stream_rng, ChannelModel, SystemParams};
use crate::contention::ContentionMode;
use crate::error::{Error, Result};
use crate::policy::{
    full_csi_decide, intuitive_main_decide, intuitive_sub_decide, optimal_main_decide,
    optimal_sub_decide, Decision, PolicyKind, PolicySpec,
};
use crate::solver::{EstimatorConfig, SubLayerLaw, MIN_GAMMA};

/// Simulator streams live in the upper half of the stream space so they never
/// coincide with solver sample streams built from the same seed.
const SIM_STREAM_BASE: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub packets: usize,
    pub seed: u64,
    /// Guard on main-layer observations per packet.
    pub main_observation_cap: u64,
    /// Guard on sub-layer observations per packet.
    pub sub_observation_cap: u64,
    pub contention_mode: ContentionMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            packets: 100_000,
            seed: 1,
            main_observation_cap: 1_000_000,
            sub_observation_cap: 1_000_000,
            contention_mode: ContentionMode::FastGeometric,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.packets == 0 {
            return Err(Error::param("packets", "must be at least 1"));
        }
        if self.main_observation_cap == 0 {
            return Err(Error::param("main_observation_cap", "must be at least 1"));
        }
        if self.sub_observation_cap == 0 {
            return Err(Error::param("sub_observation_cap", "must be at least 1"));
        }
        Ok(())
    }
}

/// One delivered packet (renewal cycle).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    pub main_observations: u64,
    /// Zero in the full-CSI scenario.
    pub sub_observations: u64,
    pub rate_at_stop: f64,
    /// 0-based forwarding relay.
    pub relay: usize,
    /// Contention plus transmission time.
    pub elapsed: f64,
    /// Time spent in source and relay contention.
    pub contention: f64,
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    pub records: Vec<PacketRecord>,
    pub total_bits: f64,
    pub total_time: f64,
    pub throughput: f64,
    pub throughput_stderr: f64,
}

impl SimStats {
    pub fn from_records(records: Vec<PacketRecord>) -> Result<Self> {
        let (throughput, throughput_stderr) = throughput_ci(&records)?;
        let total_bits = records.iter().map(|r| r.bits).sum();
        let total_time = records.iter().map(|r| r.elapsed).sum();
        Ok(Self {
            records,
            total_bits,
            total_time,
            throughput,
            throughput_stderr,
        })
    }
}

fn packet_rng(seed: u64, packet: usize) -> rand_chacha::ChaCha8Rng {
    stream_rng(seed, SIM_STREAM_BASE | packet as u64)
}

/// Full-CSI scenario under a pure threshold on the best-relay rate.
pub fn run_scenario1(
    params: &SystemParams,
    model: &ChannelModel,
    spec: &PolicySpec,
    cfg: &SimConfig,
) -> Result<SimStats> {
    params.validate()?;
    model.validate()?;
    cfg.validate()?;
    spec.validate()?;
    if spec.kind != PolicyKind::FullCsi {
        return Err(Error::InvalidPolicy {
            policy: spec.kind.name(),
            operation: "the full-CSI scenario",
        });
    }
    let mut records = Vec::with_capacity(cfg.packets);
    for packet in 0..cfg.packets {
        let mut rng = packet_rng(cfg.seed, packet);
        let mut contention = 0.0;
        let mut n = 0;
        let (rate, relay) = loop {
            if n == cfg.main_observation_cap {
                return Err(Error::ObservationCap {
                    packet,
                    layer: "main",
                    cap: cfg.main_observation_cap,
                });
            }
            n += 1;
            let c = cfg
                .contention_mode
                .sample(&mut rng, params.sources, params.p0, params.slot)?;
            contention += c.elapsed;
            let (rate, relay) = model.draw_full_csi(params, &mut rng);
            if let Decision::Stop { relay } = full_csi_decide(spec, rate, relay)? {
                break (rate, relay);
            }
        };
        records.push(PacketRecord {
            main_observations: n,
            sub_observations: 0,
            rate_at_stop: rate,
            relay,
            elapsed: contention + params.data_time,
            contention,
            bits: 0.5 * params.data_time * rate,
        });
    }
    SimStats::from_records(records)
}

/// Scenario without second-hop CSI under either bi-level rule.
///
/// Thresholds that depend on the first-hop realization are solved per
/// observation with `est`'s quadrature and tolerance.
pub fn run_scenario2(
    params: &SystemParams,
    model: &ChannelModel,
    spec: &PolicySpec,
    cfg: &SimConfig,
    est: &EstimatorConfig,
) -> Result<SimStats> {
    params.validate()?;
    model.validate()?;
    cfg.validate()?;
    est.validate()?;
    spec.validate()?;
    if spec.kind == PolicyKind::FullCsi {
        return Err(Error::InvalidPolicy {
            policy: spec.kind.name(),
            operation: "the scenario without second-hop CSI",
        });
    }
    let quad = est.quadrature();
    let half = 0.5 * params.data_time;
    let half_slot = 0.5 * params.slot;
    let mut f = vec![0.0; params.relays];
    let mut records = Vec::with_capacity(cfg.packets);

    for packet in 0..cfg.packets {
        let mut rng = packet_rng(cfg.seed, packet);
        let mut contention = 0.0;
        let mut n = 0;
        // Main layer: sources contend until a winner's first hop is good enough.
        let (law, rule) = loop {
            if n == cfg.main_observation_cap {
                return Err(Error::ObservationCap {
                    packet,
                    layer: "main",
                    cap: cfg.main_observation_cap,
                });
            }
            n += 1;
            let c = cfg
                .contention_mode
                .sample(&mut rng, params.sources, params.p0, half_slot)?;
            contention += c.elapsed;
            model.draw_first_hop(params, &mut rng, &mut f);
            let law = SubLayerLaw::new(params, model, &f);
            match spec.kind {
                PolicyKind::IntuitiveBiLevel => {
                    let stats = law.solve_intuitive(params, &quad, est.tol, est.max_iter)?;
                    if intuitive_main_decide(spec, &stats, params.data_time)?.is_stop() {
                        break (law, SubRule::Intuitive(stats.lambda_sub));
                    }
                }
                _ => {
                    let gamma = spec.gamma_star.max(MIN_GAMMA);
                    let w = law
                        .solve_w(params, gamma, &quad, est.tol, est.max_iter, None)?
                        .solution
                        .value;
                    if optimal_main_decide(spec, w, params.data_time)?.is_stop() {
                        break (law, SubRule::Optimal(w));
                    }
                }
            }
        };

        // Source broadcast, then relays contend until the observed rate is good enough.
        let mut m = 0;
        let (rate, relay) = loop {
            if m == cfg.sub_observation_cap {
                return Err(Error::ObservationCap {
                    packet,
                    layer: "sub",
                    cap: cfg.sub_observation_cap,
                });
            }
            m += 1;
            let c = cfg
                .contention_mode
                .sample(&mut rng, params.relays, params.p1, half_slot)?;
            contention += c.elapsed;
            let rate = law.sample_rate(&mut rng, c.winner);
            let stop = match rule {
                SubRule::Intuitive(lambda_sub) => intuitive_sub_decide(lambda_sub, rate),
                SubRule::Optimal(w) => optimal_sub_decide(spec, w, rate, params.data_time)?,
            };
            if stop.is_stop() {
                break (rate, c.winner);
            }
        };
        records.push(PacketRecord {
            main_observations: n,
            sub_observations: m,
            rate_at_stop: rate,
            relay,
            elapsed: contention + 2.0 * half,
            contention,
            bits: half * rate,
        });
    }
    SimStats::from_records(records)
}

#[derive(Debug, Clone, Copy)]
enum SubRule {
    Intuitive(f64),
    Optimal(f64),
}

/// Renewal-ratio throughput and its delta-method standard error.
pub fn throughput_ci(records: &[PacketRecord]) -> Result<(f64, f64)> {
    let n = records.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "a throughput standard error needs at least 2 packets, got {n}"
        )));
    }
    let total_bits: f64 = records.iter().map(|r| r.bits).sum();
    let total_time: f64 = records.iter().map(|r| r.elapsed).sum();
    let ratio = total_bits / total_time;

    // Welford means and co-moments of (bits, time)
    let (mut mb, mut mt, mut sbb, mut stt, mut sbt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, r) in records.iter().enumerate() {
        let k = (k + 1) as f64;
        let db = r.bits - mb;
        let dt = r.elapsed - mt;
        mb += db / k;
        mt += dt / k;
        sbb += db * (r.bits - mb);
        stt += dt * (r.elapsed - mt);
        sbt += db * (r.elapsed - mt);
    }
    let nf = n as f64;
    let var = (sbb - 2.0 * ratio * sbt + ratio * ratio * stt) / (nf - 1.0);
    let stderr = (var.max(0.0) / nf).sqrt() / mt;
    Ok((ratio, stderr))
}

/// Distribution of the stopping time and of the rate at stop.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingTimeStats {
    /// `histogram[k]` counts packets with `k + 1` main observations.
    pub histogram: Vec<u64>,
    pub mean_observations: f64,
    pub mean_contention: f64,
    /// Sorted rates at stop; the empirical CDF is a rank lookup.
    pub rates_at_stop: Vec<f64>,
}

impl StoppingTimeStats {
    /// Empirical `P(R_stop <= x)`.
    pub fn rate_cdf(&self, x: f64) -> f64 {
        self.rates_at_stop.partition_point(|&r| r <= x) as f64 / self.rates_at_stop.len() as f64
    }

    /// Main-observation counts, one per packet.
    pub fn observations(&self) -> impl Iterator<Item = u64> + '_ {
        self.histogram
            .iter()
            .enumerate()
            .flat_map(|(k, &c)| std::iter::repeat_n(k as u64 + 1, c as usize))
    }
}

pub fn stopping_time_stats(stats: &SimStats) -> StoppingTimeStats {
    let mut histogram = Vec::new();
    for r in &stats.records {
        let k = r.main_observations as usize - 1;
        if k >= histogram.len() {
            histogram.resize(k + 1, 0);
        }
        histogram[k] += 1;
    }
    let n = stats.records.len().max(1) as f64;
    let mut rates_at_stop: Vec<f64> = stats.records.iter().map(|r| r.rate_at_stop).collect();
    rates_at_stop.sort_by(f64::total_cmp);
    StoppingTimeStats {
        histogram,
        mean_observations: stats
            .records
            .iter()
            .map(|r| r.main_observations as f64)
            .sum::<f64>()
            / n,
        mean_contention: stats.records.iter().map(|r| r.contention).sum::<f64>() / n,
        rates_at_stop,
    }
}
