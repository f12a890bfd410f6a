//! Browser bindings for the stopping-rule solvers and simulator.
//!
//! Every exported function takes a JSON request and returns a JSON reply so
//! the page needs no generated types. The same functions run natively, which
//! is how the tests exercise them.

use relay_stopping::solver::{full_csi_residual, renewal_throughput};
use relay_stopping::{
    first_hop_sample, run_scenario1, run_scenario2, solve_full_csi_lambda, stopping_time_stats,
    ChannelModel, EstimatorConfig, IntuitiveMainLayer, OptimalMainLayer, PolicySpec, RateSample,
    SimConfig, SystemParams,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;

/// Keeps a click from freezing the tab.
const MAX_MC_SAMPLES: usize = 200_000;
const MAX_PACKETS: usize = 200_000;
const MAX_CURVE_POINTS: usize = 2_000;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Request {
    pub params: SystemParams,
    pub mc_samples: usize,
    pub seed: u64,
    pub curve_points: usize,
    /// `"1"`, `"2-intuitive"` or `"2-optimal"`.
    pub scenario: String,
    pub packets: usize,
}

impl Default for Request {
    fn default() -> Self {
        Self {
            params: SystemParams::default(),
            mc_samples: 5_000,
            seed: 1,
            curve_points: 200,
            scenario: "1".into(),
            packets: 20_000,
        }
    }
}

impl Request {
    fn estimator(&self) -> Result<EstimatorConfig, String> {
        if self.mc_samples > MAX_MC_SAMPLES {
            return Err(format!(
                "mc_samples is capped at {MAX_MC_SAMPLES} in the browser"
            ));
        }
        let est = EstimatorConfig {
            mc_samples: self.mc_samples,
            seed: self.seed,
            ..Default::default()
        };
        est.validate().map_err(|e| e.to_string())?;
        self.params.validate().map_err(|e| e.to_string())?;
        Ok(est)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullCsiReply {
    pub lambda_star: f64,
    pub rate_threshold: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Throughput of the pure rule "stop once the rate reaches x".
    pub throughput_curve: Vec<CurvePoint>,
    /// The fixed-point residual over lambda; its zero is `lambda_star`.
    pub residual_curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLevelReply {
    pub gamma_intuitive: f64,
    pub gamma_optimal: f64,
    pub residual_intuitive: f64,
    pub residual_optimal: f64,
    pub gap: f64,
    /// Optimal-rule value over gamma; it crosses zero at `gamma_optimal`.
    pub value_curve: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReply {
    pub scenario: String,
    pub threshold: f64,
    pub throughput: f64,
    pub stderr: f64,
    pub mean_main_observations: f64,
    pub mean_contention: f64,
    /// Packets that stopped at the k-th main observation, k = 1, 2, ...
    pub observation_histogram: Vec<u64>,
}

fn curve_points(n: usize) -> Result<usize, String> {
    match n {
        0 | 1 => Err("curve_points must be at least 2".into()),
        n if n > MAX_CURVE_POINTS => Err(format!("curve_points is capped at {MAX_CURVE_POINTS}")),
        n => Ok(n),
    }
}

pub fn full_csi(req: &Request) -> Result<FullCsiReply, String> {
    let est = req.estimator()?;
    let n = curve_points(req.curve_points)?;
    let p = &req.params;
    let sample = RateSample::draw(p, &ChannelModel::rayleigh(), &est).map_err(|e| e.to_string())?;
    let sol = solve_full_csi_lambda(p, &sample, &est).map_err(|e| e.to_string())?;
    let top = sample.max();
    let throughput_curve = (0..n)
        .filter_map(|i| {
            let x = top * i as f64 / (n - 1) as f64;
            renewal_throughput(p, &sample, x).map(|y| CurvePoint { x, y })
        })
        .collect();
    let span = 2.0 * sol.value.max(0.1);
    let residual_curve = (0..n)
        .map(|i| {
            let x = span * i as f64 / (n - 1) as f64;
            CurvePoint {
                x,
                y: full_csi_residual(p, &sample, x),
            }
        })
        .collect();
    Ok(FullCsiReply {
        lambda_star: sol.value,
        rate_threshold: 2.0 * sol.value,
        residual: sol.residual,
        iterations: sol.iterations,
        throughput_curve,
        residual_curve,
    })
}

pub fn bilevel(req: &Request) -> Result<BiLevelReply, String> {
    let est = req.estimator()?;
    let n = curve_points(req.curve_points)?.min(60);
    let p = &req.params;
    let sample = first_hop_sample(p, &ChannelModel::rayleigh(), &est).map_err(|e| e.to_string())?;
    let gi = IntuitiveMainLayer::build(p, &sample, &est)
        .and_then(|m| m.solve(&est))
        .map_err(|e| e.to_string())?;
    let optimal = OptimalMainLayer::build(p, &sample, &est).map_err(|e| e.to_string())?;
    let go = optimal
        .solve(&est, Some(gi.value))
        .map_err(|e| e.to_string())?;
    let span = 2.0 * go.value.max(0.1);
    let xs: Vec<f64> = (1..n).map(|i| span * i as f64 / (n - 1) as f64).collect();
    let ys = optimal.value_curve(&xs).map_err(|e| e.to_string())?;
    let value_curve = xs
        .into_iter()
        .zip(ys)
        .map(|(x, y)| CurvePoint { x, y })
        .collect();
    Ok(BiLevelReply {
        gamma_intuitive: gi.value,
        gamma_optimal: go.value,
        residual_intuitive: gi.residual,
        residual_optimal: go.residual,
        gap: go.value - gi.value,
        value_curve,
    })
}

pub fn simulate(req: &Request) -> Result<SimulateReply, String> {
    let est = req.estimator()?;
    if req.packets > MAX_PACKETS {
        return Err(format!("packets is capped at {MAX_PACKETS} in the browser"));
    }
    let p = &req.params;
    let model = ChannelModel::rayleigh();
    let cfg = SimConfig {
        packets: req.packets,
        seed: req.seed,
        ..Default::default()
    };
    let err = |e: relay_stopping::Error| e.to_string();
    let (threshold, stats) = match req.scenario.as_str() {
        "1" => {
            let sample = RateSample::draw(p, &model, &est).map_err(err)?;
            let lambda = solve_full_csi_lambda(p, &sample, &est).map_err(err)?.value;
            (
                lambda,
                run_scenario1(p, &model, &PolicySpec::full_csi(lambda), &cfg).map_err(err)?,
            )
        }
        "2-intuitive" | "2-optimal" => {
            let sample = first_hop_sample(p, &model, &est).map_err(err)?;
            let gi = IntuitiveMainLayer::build(p, &sample, &est)
                .and_then(|m| m.solve(&est))
                .map_err(err)?
                .value;
            let spec = if req.scenario == "2-intuitive" {
                PolicySpec::intuitive(gi)
            } else {
                let go = OptimalMainLayer::build(p, &sample, &est)
                    .and_then(|m| m.solve(&est, Some(gi)))
                    .map_err(err)?;
                PolicySpec::optimal(go.value)
            };
            (
                spec.gamma_star,
                run_scenario2(p, &model, &spec, &cfg, &est).map_err(err)?,
            )
        }
        other => {
            return Err(format!(
                "unknown scenario `{other}`, expected 1, 2-intuitive or 2-optimal"
            ))
        }
    };
    let st = stopping_time_stats(&stats);
    Ok(SimulateReply {
        scenario: req.scenario.clone(),
        threshold,
        throughput: stats.throughput,
        stderr: stats.throughput_stderr,
        mean_main_observations: st.mean_observations,
        mean_contention: st.mean_contention,
        observation_histogram: st.histogram,
    })
}

fn call<T: Serialize>(
    json: &str,
    f: impl Fn(&Request) -> Result<T, String>,
) -> Result<String, String> {
    let req: Request = parse(json)?;
    let reply = f(&req)?;
    serde_json::to_string(&reply).map_err(|e| e.to_string())
}

fn parse<T: DeserializeOwned>(json: &str) -> Result<T, String> {
    serde_json::from_str(json).map_err(|e| format!("bad request: {e}"))
}

/// Full-CSI threshold plus throughput and residual curves.
#[wasm_bindgen]
pub fn solve_full_csi(request: &str) -> Result<String, String> {
    call(request, full_csi)
}

/// Both bi-level thresholds on one first-hop sample.
#[wasm_bindgen]
pub fn solve_bilevel(request: &str) -> Result<String, String> {
    call(request, bilevel)
}

/// Solve, then simulate the chosen scenario.
#[wasm_bindgen]
pub fn simulate_scenario(request: &str) -> Result<String, String> {
    call(request, simulate)
}
