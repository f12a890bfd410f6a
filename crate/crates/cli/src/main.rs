//! `relaystop`: solve, simulate and cross-check opportunistic channel-access
//! stopping rules.
//!
//! Exit status is 0 when every verdict passes, 1 when any fails, and 2 on a
//! configuration or solver error.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Overrides, Scenario};
use crate::error::CliResult;
use crate::report::{ensure_dir, write_summary, Summary};

#[derive(Parser, Debug)]
#[command(name = "relaystop", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for both the solver sample and the simulator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of simulated packets.
    #[arg(long, global = true)]
    packets: Option<usize>,
    /// Output directory for summary.json and CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    scenario: Option<Scenario>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the threshold of the selected scenario.
    Solve,
    /// Solve, simulate and check the simulated throughput against the optimum.
    Simulate,
    /// Run both bi-level rules under common seeds.
    Compare,
    /// Repeat solve (optionally simulate) along one parameter axis.
    Sweep {
        /// Parameter to vary, e.g. `L` or `p0`.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Option<Vec<f64>>,
        /// Also simulate every point.
        #[arg(long)]
        simulate: bool,
    },
    /// Brute-force grid search over full-CSI thresholds.
    Oracle {
        #[arg(long)]
        grid_points: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = match &cli.common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.common.seed,
        packets: cli.common.packets,
        out: cli.common.out.clone(),
        scenario: cli.common.scenario,
    });
    match &cli.command {
        Command::Sweep {
            axis,
            values,
            simulate,
        } => {
            if let Some(axis) = axis {
                cfg.sweep.axis = axis.clone();
            }
            if let Some(values) = values {
                cfg.sweep.values = values.clone();
            }
            cfg.sweep.simulate |= simulate;
        }
        Command::Oracle {
            grid_points: Some(n),
        } => cfg.oracle.grid_points = *n,
        _ => {}
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> CliResult<Summary> {
    let started = Instant::now();
    let cfg = load_config(cli)?;
    let mut summary = match cli.command {
        Command::Solve => commands::solve(&cfg)?,
        Command::Simulate => commands::simulate(&cfg)?,
        Command::Compare => commands::compare(&cfg)?,
        Command::Sweep { .. } => commands::sweep(&cfg)?,
        Command::Oracle { .. } => commands::oracle(&cfg)?,
    };
    summary.runtime.wall_clock_secs = started.elapsed().as_secs_f64();
    ensure_dir(&cfg.output.dir)?;
    let path = commands::summary_path(&cfg);
    write_summary(&path, &summary)?;
    for v in &summary.verdicts {
        println!("{}", v.line());
    }
    println!("summary written to {}", path.display());
    Ok(summary)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) if summary.all_pass => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
