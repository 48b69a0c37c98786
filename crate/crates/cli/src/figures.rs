//! `fig1` fidelity sweeps and `fig2` optimized pulse shapes.

use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Value};
use telegraph::fidelity::{fidelity_sweep, SweepRow};
use telegraph::grape::{optimize_multistart, optimize_pulse, standard_starts, OptimizationResult};
use telegraph::pulse::{CompositePulse, ControlPulse};

use crate::config::Config;
use crate::output::{num, write_csv, write_json};
use crate::CliError;

/// Optimized pulse at one noise point, with the start it grew from.
#[derive(Clone, Debug)]
pub struct Optimized {
    pub tau_c: f64,
    pub start: String,
    pub result: OptimizationResult,
}

pub fn optimize_at(cfg: &Config, delta: f64, tau_c: f64) -> Result<Optimized, CliError> {
    let oc = cfg.optimize.at(delta, tau_c);
    let (start, result) = if cfg.optimize.multistart {
        optimize_multistart(&oc, &standard_starts(&oc)?)?
    } else {
        ("stretched_pi".to_string(), optimize_pulse(&oc)?)
    };
    Ok(Optimized { tau_c, start, result })
}

fn optimize_all(cfg: &Config, delta: f64, taus: &[f64]) -> Result<Vec<Optimized>, CliError> {
    taus.par_iter().map(|&t| optimize_at(cfg, delta, t)).collect()
}

#[derive(Clone, Debug)]
pub struct Panel {
    pub delta: f64,
    /// Composite rows followed, per `τc`, by the `optimized` row.
    pub rows: Vec<SweepRow>,
    pub optimized: Vec<Optimized>,
}

impl Panel {
    pub fn fidelity(&self, tau_c: f64, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.tau_c == tau_c && r.pulse_name == name).map(|r| r.fidelity)
    }

    /// `Φ_opt - max(composites)` at every `τc`.
    pub fn margins(&self) -> Vec<(f64, f64)> {
        self.optimized
            .iter()
            .map(|o| {
                let best = CompositePulse::ALL
                    .iter()
                    .filter_map(|p| self.fidelity(o.tau_c, p.name()))
                    .fold(f64::NEG_INFINITY, f64::max);
                (o.tau_c, o.result.fidelity - best)
            })
            .collect()
    }
}

pub fn composites() -> Result<Vec<(String, ControlPulse)>, CliError> {
    CompositePulse::ALL.iter().map(|p| Ok((p.name().to_string(), p.build(1.0)?))).collect()
}

pub fn fig1(cfg: &Config) -> Result<Vec<Panel>, CliError> {
    let taus = cfg.fig1.taus();
    let solver = cfg.solver()?;
    let pulses = composites()?;
    let mut panels = Vec::new();
    for &delta in &cfg.fig1.deltas {
        let sweep = fidelity_sweep(&pulses, delta, &taus, &solver)?;
        let optimized = if cfg.fig1.optimize { optimize_all(cfg, delta, &taus)? } else { Vec::new() };
        let mut rows = Vec::with_capacity(sweep.len() + optimized.len());
        for (k, &tau_c) in taus.iter().enumerate() {
            rows.extend(sweep.iter().filter(|r| r.tau_c == tau_c).cloned());
            if let Some(o) = optimized.get(k) {
                rows.push(SweepRow { tau_c, pulse_name: "optimized".into(), delta, fidelity: o.result.fidelity });
            }
        }
        panels.push(Panel { delta, rows, optimized });
    }
    Ok(panels)
}

pub fn fig1_file(delta: f64) -> String {
    format!("fig1_delta_{}.csv", num(delta))
}

pub fn write_fig1(cfg: &Config, panels: &[Panel]) -> Result<Vec<PathBuf>, CliError> {
    let dir = cfg.output_dir();
    let mut paths = Vec::new();
    let mut summary = Vec::new();
    for p in panels {
        let rows: Vec<String> = p
            .rows
            .iter()
            .map(|r| format!("{},{},{},{}", num(r.tau_c), r.pulse_name, num(r.delta), num(r.fidelity)))
            .collect();
        paths.push(write_csv(&dir, &fig1_file(p.delta), cfg, SweepRow::CSV_HEADER, &rows)?);
        let margins = p.margins();
        let points: Vec<Value> = p
            .optimized
            .iter()
            .zip(&margins)
            .map(|(o, (_, m))| {
                json!({
                    "tau_c": o.tau_c,
                    "optimized": o.result.fidelity,
                    "start": o.start,
                    "iterations": o.result.iterations,
                    "converged": o.result.converged,
                    "margin": m,
                })
            })
            .collect();
        let worst = margins.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1));
        summary.push(json!({
            "delta": p.delta,
            "points": points,
            "min_margin": worst.map(|w| w.1),
            "min_margin_tau_c": worst.map(|w| w.0),
        }));
    }
    paths.push(write_json(&dir, "fig1_summary.json", cfg, json!({ "panels": summary }))?);
    Ok(paths)
}

pub fn fig2(cfg: &Config) -> Result<Vec<Optimized>, CliError> {
    cfg.fig2.taus.par_iter().map(|&t| optimize_at(cfg, cfg.fig2.delta, t)).collect()
}

pub fn fig2_file(tau_c: f64) -> String {
    format!("fig2_tau_{}.csv", num(tau_c))
}

pub const PULSE_COLUMNS: &str = "t_start,duration,amplitude";

pub fn pulse_rows(p: &ControlPulse) -> Vec<String> {
    p.start_times()
        .iter()
        .zip(p.segments())
        .map(|(t, s)| format!("{},{},{}", num(*t), num(s.duration), num(s.amplitude)))
        .collect()
}

pub fn write_fig2(cfg: &Config, pulses: &[Optimized]) -> Result<Vec<PathBuf>, CliError> {
    let dir = cfg.output_dir();
    let mut paths = Vec::new();
    let mut summary = Vec::new();
    for o in pulses {
        paths.push(write_csv(&dir, &fig2_file(o.tau_c), cfg, PULSE_COLUMNS, &pulse_rows(&o.result.pulse))?);
        let peak = o.result.pulse.amplitudes().iter().fold(0.0f64, |m, a| m.max(a.abs()));
        summary.push(json!({
            "tau_c": o.tau_c,
            "fidelity": o.result.fidelity,
            "start": o.start,
            "sign_changes": o.result.pulse.sign_changes(cfg.fig2.sign_threshold),
            "max_abs_amplitude": peak,
            "iterations": o.result.iterations,
            "converged": o.result.converged,
        }));
    }
    paths.push(write_json(&dir, "fig2_summary.json", cfg, json!({ "delta": cfg.fig2.delta, "pulses": summary }))?);
    Ok(paths)
}
