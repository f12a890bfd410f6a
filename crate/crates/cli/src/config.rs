//! Experiment configuration: a TOML file with a versioned schema, plus
//! command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use relay_stopping::{ChannelModel, EstimatorConfig, SimConfig, SystemParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

/// Smaller first-hop samples are fine in unit tests but not in reported runs.
pub const MIN_MC_SAMPLES: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
pub enum Scenario {
    /// Full CSI at the winning source.
    #[default]
    #[serde(rename = "1")]
    #[value(name = "1")]
    FullCsi,
    #[serde(rename = "2-intuitive")]
    #[value(name = "2-intuitive")]
    Intuitive,
    #[serde(rename = "2-optimal")]
    #[value(name = "2-optimal")]
    Optimal,
}

/// `SystemParams` as written in the file. `p1` may be left out when only
/// scenario 1 is run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[allow(non_snake_case)]
pub struct ParamsConfig {
    pub K: usize,
    pub L: usize,
    pub ps: f64,
    pub pr: f64,
    pub sigma_f_sq: f64,
    pub sigma_g_sq: f64,
    pub tau: f64,
    pub T: f64,
    pub p0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        let p = SystemParams::default();
        Self {
            K: p.sources,
            L: p.relays,
            ps: p.source_power,
            pr: p.relay_power,
            sigma_f_sq: p.first_hop_var,
            sigma_g_sq: p.second_hop_var,
            tau: p.slot,
            T: p.data_time,
            p0: p.p0,
            p1: None,
        }
    }
}

/// Names accepted by `sweep`.
pub const SWEEP_AXES: [&str; 10] = [
    "K",
    "L",
    "ps",
    "pr",
    "sigma_f_sq",
    "sigma_g_sq",
    "tau",
    "T",
    "p0",
    "p1",
];

impl ParamsConfig {
    /// Resolves to validated system parameters. Without `p1` a scenario-2
    /// run is a config error; scenario 1 never reads it, so `1/L` stands in.
    pub fn resolve(&self, needs_p1: bool) -> CliResult<SystemParams> {
        let p1 = match self.p1 {
            Some(p1) => p1,
            None if needs_p1 => {
                return Err(CliError::config(
                    "params.p1",
                    "required for scenario 2 and compare",
                ));
            }
            None => 1.0 / self.L.max(1) as f64,
        };
        let params = SystemParams {
            sources: self.K,
            relays: self.L,
            source_power: self.ps,
            relay_power: self.pr,
            first_hop_var: self.sigma_f_sq,
            second_hop_var: self.sigma_g_sq,
            slot: self.tau,
            data_time: self.T,
            p0: self.p0,
            p1,
        };
        params
            .validate()
            .map_err(|e| CliError::in_section("params", e))?;
        Ok(params)
    }

    /// Copy with one axis replaced. Integer axes reject fractional values.
    pub fn with_axis(&self, axis: &str, value: f64) -> CliResult<Self> {
        let mut out = *self;
        let count = |v: f64| -> CliResult<usize> {
            if v.fract() == 0.0 && v >= 0.0 && v <= u32::MAX as f64 {
                Ok(v as usize)
            } else {
                Err(CliError::config(
                    "sweep.values",
                    format!("{axis} takes whole numbers, got {v}"),
                ))
            }
        };
        match axis {
            "K" => out.K = count(value)?,
            "L" => out.L = count(value)?,
            "ps" => out.ps = value,
            "pr" => out.pr = value,
            "sigma_f_sq" => out.sigma_f_sq = value,
            "sigma_g_sq" => out.sigma_g_sq = value,
            "tau" => out.tau = value,
            "T" => out.T = value,
            "p0" => out.p0 = value,
            "p1" => out.p1 = Some(value),
            _ => {
                return Err(CliError::config(
                    "sweep.axis",
                    format!(
                        "unknown axis `{axis}`, expected one of {}",
                        SWEEP_AXES.join(", ")
                    ),
                ))
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: String,
    pub values: Vec<f64>,
    /// Also simulate every point.
    pub simulate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub grid_points: usize,
    /// Grid bounds on the rate threshold; default `[0, max sampled rate]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            grid_points: 500,
            lo: None,
            hi: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub scenario: Scenario,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

impl Default for ExperimentConfig {
    /// The standard configuration, with `p1 = 0.5` so every command runs.
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            scenario: Scenario::default(),
            params: ParamsConfig {
                p1: Some(SystemParams::default().p1),
                ..Default::default()
            },
            channel: ChannelModel::default(),
            estimator: EstimatorConfig::default(),
            sim: SimConfig::default(),
            output: OutputConfig::default(),
            sweep: SweepConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

/// Values given on the command line; each one wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub packets: Option<usize>,
    pub out: Option<PathBuf>,
    pub scenario: Option<Scenario>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| CliError::config("<document>", e.message().trim()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." {
                "<document>".to_string()
            } else {
                path
            };
            CliError::config(field, e.into_inner().message().trim())
        })?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(CliError::config(
                "schema",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    cfg.schema
                ),
            ));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// `--seed` seeds both the solver sample and the simulator.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.estimator.seed = seed;
            self.sim.seed = seed;
        }
        if let Some(packets) = o.packets {
            self.sim.packets = packets;
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        if let Some(scenario) = o.scenario {
            self.scenario = scenario;
        }
    }

    /// Checks the sections every command reads.
    pub fn validate(&self) -> CliResult<()> {
        self.channel
            .validate()
            .map_err(|e| CliError::in_section("channel", e))?;
        self.estimator
            .validate()
            .map_err(|e| CliError::in_section("estimator", e))?;
        if self.estimator.mc_samples < MIN_MC_SAMPLES {
            return Err(CliError::config(
                "estimator.mc_samples",
                format!(
                    "must be at least {MIN_MC_SAMPLES}, got {}",
                    self.estimator.mc_samples
                ),
            ));
        }
        self.sim
            .validate()
            .map_err(|e| CliError::in_section("sim", e))?;
        Ok(())
    }
}
