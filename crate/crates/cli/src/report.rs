//! Summary JSON, per-packet CSV and the sweep table.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use relay_stopping::{SimStats, ThresholdSolution};
use serde::Serialize;

use crate::config::{ExperimentConfig, Scenario};
use crate::error::{CliError, CliResult};

/// Titles of the acceptance criteria that verdicts point at.
pub fn criterion_title(id: u32) -> &'static str {
    match id {
        1 => "fixed-point correctness",
        2 => "oracle agreement",
        3 => "simulation-solver consistency (scenario 1)",
        4 => "stopping-time laws",
        5 => "local threshold optimality",
        6 => "bi-level closed forms",
        7 => "optimal bi-level consistency",
        8 => "intuitive-rule consistency and dominance",
        9 => "analytical bounds",
        10 => "structural properties",
        _ => "unknown",
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub criterion: u32,
    pub criterion_title: &'static str,
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(
        criterion: u32,
        check: impl Into<String>,
        pass: bool,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            criterion,
            criterion_title: criterion_title(criterion),
            check: check.into(),
            pass,
            detail: detail.into(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} [criterion {}: {}] {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.criterion,
            self.criterion_title,
            self.check,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub name: String,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

impl ThresholdReport {
    pub fn new(name: impl Into<String>, sol: &ThresholdSolution) -> Self {
        Self {
            name: name.into(),
            value: sol.value,
            residual: sol.residual,
            iterations: sol.iterations,
            bracket: sol.bracket,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub policy: String,
    pub packets: usize,
    pub throughput: f64,
    pub stderr: f64,
    /// Solved optimum the throughput is checked against.
    pub target: f64,
    pub capped_packets: usize,
    pub mean_main_observations: f64,
    pub mean_sub_observations: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub packets_csv: Option<PathBuf>,
}

impl SimReport {
    pub fn new(policy: &str, stats: &SimStats, target: f64, packets_csv: Option<PathBuf>) -> Self {
        let n = stats.records.len().max(1) as f64;
        Self {
            policy: policy.to_string(),
            packets: stats.records.len(),
            throughput: stats.throughput,
            stderr: stats.throughput_stderr,
            target,
            capped_packets: 0,
            mean_main_observations: stats
                .records
                .iter()
                .map(|r| r.main_observations as f64)
                .sum::<f64>()
                / n,
            mean_sub_observations: stats
                .records
                .iter()
                .map(|r| r.sub_observations as f64)
                .sum::<f64>()
                / n,
            packets_csv,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub grid_points: usize,
    pub grid: (f64, f64),
    pub grid_step: f64,
    pub evaluated: usize,
    pub best_threshold: f64,
    pub best_throughput: f64,
    /// `2 lambda*` from the fixed-point solver.
    pub solver_threshold: f64,
    pub solver_throughput: f64,
    /// Distance from `2 lambda*` to the nearest grid point attaining the best throughput.
    pub threshold_delta: f64,
    pub throughput_rel_delta: f64,
    /// The solver's threshold falls outside the searched grid.
    pub bracket_mismatch: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub threshold_name: String,
    pub threshold: f64,
    pub residual: f64,
    pub iterations: usize,
    pub throughput: Option<f64>,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Seeds {
    pub estimator: u64,
    pub sim: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Runtime {
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub schema: u32,
    pub command: &'static str,
    pub scenario: Scenario,
    pub seed: Seeds,
    pub thresholds: Vec<ThresholdReport>,
    pub simulations: Vec<SimReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_csv: Option<PathBuf>,
    pub verdicts: Vec<Verdict>,
    pub all_pass: bool,
    pub runtime: Runtime,
    pub config: ExperimentConfig,
}

impl Summary {
    pub fn new(command: &'static str, cfg: &ExperimentConfig) -> Self {
        Self {
            schema: cfg.schema,
            command,
            scenario: cfg.scenario,
            seed: Seeds {
                estimator: cfg.estimator.seed,
                sim: cfg.sim.seed,
            },
            thresholds: Vec::new(),
            simulations: Vec::new(),
            oracle: None,
            sweep: Vec::new(),
            sweep_csv: None,
            verdicts: Vec::new(),
            all_pass: true,
            runtime: Runtime {
                wall_clock_secs: 0.0,
            },
            config: cfg.clone(),
        }
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.all_pass &= v.pass;
        self.verdicts.push(v);
    }
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Write {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn write_summary(path: &Path, summary: &Summary) -> CliResult<()> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(wrap)?);
    serde_json::to_writer_pretty(&mut out, summary).map_err(|e| wrap(e.into()))?;
    out.write_all(b"\n").map_err(wrap)?;
    out.flush().map_err(wrap)
}

#[derive(Serialize)]
struct PacketRow {
    packet_index: usize,
    main_observations: u64,
    sub_observations: u64,
    rate_at_stop: f64,
    /// 1-based, as relays are numbered in the protocol description.
    relay: usize,
    elapsed: f64,
    bits: f64,
}

pub fn write_packets(path: &Path, stats: &SimStats) -> CliResult<()> {
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    for (packet_index, r) in stats.records.iter().enumerate() {
        w.serialize(PacketRow {
            packet_index,
            main_observations: r.main_observations,
            sub_observations: r.sub_observations,
            rate_at_stop: r.rate_at_stop,
            relay: r.relay + 1,
            elapsed: r.elapsed,
            bits: r.bits,
        })
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| wrap(e.into()))
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> CliResult<()> {
    let wrap = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|e| wrap(e.into()))
}
