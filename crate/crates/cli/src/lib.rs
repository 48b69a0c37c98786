//! Experiment driver for the `telegraph` command.
//!
//! Each subcommand has a `run` returning in-memory results and a `write`
//! emitting artifacts under the output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub mod check;
pub mod config;
pub mod evolve;
pub mod figures;
pub mod optimize;
pub mod output;
pub mod validate;

use config::{load_config, Config, Overrides, SolverKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl From<telegraph::Error> for CliError {
    fn from(e: telegraph::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::CheckFailed(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "telegraph", version, about = "Qubit dynamics under telegraph noise and NOT-gate pulse design")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub solver: Option<SolverKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Average state on a time grid.
    Evolve,
    /// NOT-gate fidelity against correlation time, composites and optimized.
    Fig1,
    /// Optimized pulse shapes at several correlation times.
    Fig2,
    /// Pairwise agreement of the ensemble, memory-kernel and defect solvers.
    Check,
    /// Monte Carlo averages against the deterministic solver.
    McValidate,
    /// One pulse optimization.
    Optimize,
}

pub fn resolve(common: &CommonArgs) -> Result<Config, CliError> {
    let ov = Overrides { seed: common.seed, solver: common.solver, jobs: common.jobs, out: common.out.clone() };
    load_config(common.config.as_deref(), &ov)
}

fn validate(command: Command, cfg: &Config) -> Result<(), CliError> {
    cfg.validate_common()?;
    match command {
        Command::Evolve => cfg.validate_evolve(),
        Command::Fig1 => cfg.validate_fig1(),
        Command::Fig2 => cfg.validate_fig2(),
        Command::Check => cfg.validate_check(),
        Command::McValidate => cfg.validate_mc(),
        Command::Optimize => Ok(()),
    }
}

fn dispatch(command: Command, cfg: &Config) -> Result<Vec<PathBuf>, CliError> {
    match command {
        Command::Evolve => Ok(vec![evolve::write(cfg, &evolve::run(cfg)?)?]),
        Command::Fig1 => figures::write_fig1(cfg, &figures::fig1(cfg)?),
        Command::Fig2 => figures::write_fig2(cfg, &figures::fig2(cfg)?),
        Command::Optimize => optimize::write(cfg, &optimize::run(cfg)?),
        Command::Check => {
            let report = check::run(cfg)?;
            let path = check::write(cfg, &report)?;
            if !report.passed() {
                let w = report.worst();
                return Err(CliError::CheckFailed(format!(
                    "{} distance {:e} exceeds {:e} at delta={} tau_c={} pulse={} (report in {})",
                    w.pair,
                    w.max_distance,
                    report.threshold,
                    w.delta,
                    w.tau_c,
                    w.pulse,
                    path.display()
                )));
            }
            Ok(vec![path])
        }
        Command::McValidate => {
            let cells = validate::run(cfg)?;
            let path = validate::write(cfg, &cells)?;
            let m = &cfg.mc_validate;
            if let Some(c) = cells.iter().find(|c| !c.passed(m.sigmas, m.max_std_error)) {
                return Err(CliError::CheckFailed(format!(
                    "delta={} tau_c={} pulse={}: fidelity z={:.3}, state z={:.3}, std errors {:e}/{:e} (table in {})",
                    c.delta,
                    c.tau_c,
                    c.pulse,
                    c.fidelity_z,
                    c.state_z,
                    c.std_error,
                    c.state_std_error,
                    path.display()
                )));
            }
            Ok(vec![path])
        }
    }
}

/// Run a command with a resolved configuration inside a pool of `jobs` threads.
pub fn execute(command: Command, cfg: &Config) -> Result<Vec<PathBuf>, CliError> {
    validate(command, cfg)?;
    match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.to_string()))?
            .install(|| dispatch(command, cfg)),
        None => dispatch(command, cfg),
    }
}

pub fn main_with(cli: Cli) -> ExitCode {
    let result = resolve(&cli.common).and_then(|cfg| execute(cli.command, &cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("telegraph: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
