//! Distributed opportunistic channel access for multi-source, multi-relay
//! amplify-and-forward networks.
//!
//! Sources contend for the channel in slotted random access. The winner of
//! each contention either transmits or gives up the channel for another
//! round, and the optimal decision is a threshold rule found by optimal
//! stopping. This crate solves the threshold equations of three rules:
//!
//! * full CSI, where the winner sees both hops of every relay;
//! * the intuitive two-level rule, which nests a throughput-maximizing relay
//!   rule inside a source rule when the second hop is unknown;
//! * the optimal two-level rule, whose relay threshold follows from a reward
//!   fixed point `W*(gamma)`.
//!
//! It also simulates the slotted protocol under each rule so that simulated
//! throughput can be compared with the solved optimum.
//!
//! ```
//! use relay_stopping::{solve_full_csi_lambda, ChannelModel, EstimatorConfig, RateSample, SystemParams};
//!
//! let params = SystemParams::default();
//! let est = EstimatorConfig { mc_samples: 5_000, ..Default::default() };
//! let sample = RateSample::draw(&params, &ChannelModel::rayleigh(), &est).unwrap();
//! let lambda = solve_full_csi_lambda(&params, &sample, &est).unwrap();
//! assert!(lambda.residual.abs() <= est.tol);
//! ```

pub mod channel;
pub mod contention;
pub mod error;
pub mod gof;
pub mod policy;
pub mod sim;
pub mod solver;

pub use channel::{
    af_rate, best_relay_rate, rate_saturation, sample_gain_sq, stream_rng, ChannelModel,
    ChannelRealization, GainLaw, RateLaw, SystemParams,
};
pub use contention::{
    sample_contention, simulate_contention_slots, success_prob, ContentionMode, ContentionOutcome,
};
pub use error::{Error, Result};
pub use policy::{Decision, PolicyKind, PolicySpec, Verdict};
pub use sim::{
    run_scenario1, run_scenario2, stopping_time_stats, throughput_ci, PacketRecord, SimConfig,
    SimStats,
};
pub use solver::{
    first_hop_sample, oracle_threshold_search, solve_full_csi_lambda, solve_main_gamma_intuitive,
    solve_main_gamma_optimal, solve_sub_layer_intuitive, solve_sub_w, EstimatorConfig,
    FirstHopSample, IntuitiveMainLayer, OptimalMainLayer, RateSample, SubLayerLaw, SubLayerStats,
    ThresholdSolution,
};
