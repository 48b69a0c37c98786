//! `optimize`: a single gradient-ascent run at the configured noise point.

use std::path::PathBuf;

use serde_json::json;

use crate::config::Config;
use crate::figures::{optimize_at, pulse_rows, Optimized, PULSE_COLUMNS};
use crate::output::{write_csv, write_json};
use crate::CliError;

pub fn run(cfg: &Config) -> Result<Optimized, CliError> {
    optimize_at(cfg, cfg.optimize.delta, cfg.optimize.tau_c)
}

pub fn write(cfg: &Config, o: &Optimized) -> Result<Vec<PathBuf>, CliError> {
    let dir = cfg.output_dir();
    let r = &o.result;
    let body = json!({
        "start": o.start,
        "fidelity": r.fidelity,
        "iterations": r.iterations,
        "converged": r.converged,
        "pulse": {
            "amplitudes": r.pulse.amplitudes(),
            "total_time": r.pulse.duration(),
            "a_max": r.pulse.a_max(),
        },
        "history": r.fidelity_history,
    });
    Ok(vec![
        write_json(&dir, "optimize.json", cfg, body)?,
        write_csv(&dir, "optimize_pulse.csv", cfg, PULSE_COLUMNS, &pulse_rows(&r.pulse))?,
    ])
}
