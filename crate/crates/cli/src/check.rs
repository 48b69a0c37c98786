//! `check`: pairwise agreement of the three deterministic formulations.

use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Value};
use telegraph::born::{evolve_born_exponential, CorrelationKernel};
use telegraph::defect::{evolve_defect_full, partial_trace_defect, stationary_joint_state, DefectModel};
use telegraph::drive::Drive;
use telegraph::ensemble::{evolve_average, Backend};
use telegraph::noise::{rtn_model, RtnSpec};
use telegraph::operators::{trace_distance, DensityOperator};
use telegraph::pulse::CompositePulse;

use crate::config::Config;
use crate::output::write_json;
use crate::CliError;

pub const PAIRS: [(&str, usize, usize); 3] =
    [("ensemble-born", 0, 1), ("ensemble-defect", 0, 2), ("born-defect", 1, 2)];

/// Largest distance for one solver pair and where it occurred.
#[derive(Clone, Debug, PartialEq)]
pub struct PairWorst {
    pub pair: &'static str,
    pub max_distance: f64,
    pub delta: f64,
    pub tau_c: f64,
    pub pulse: &'static str,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub pairs: Vec<PairWorst>,
    pub threshold: f64,
    pub cells: usize,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.pairs.iter().all(|p| p.max_distance <= self.threshold)
    }

    pub fn worst(&self) -> &PairWorst {
        self.pairs.iter().max_by(|a, b| a.max_distance.total_cmp(&b.max_distance)).expect("three pairs")
    }
}

/// `|0⟩, |1⟩, |+x⟩, |+y⟩`.
fn probe_states() -> telegraph::Result<Vec<DensityOperator>> {
    use nalgebra::Vector3;
    [Vector3::z(), -Vector3::z(), Vector3::x(), Vector3::y()].iter().map(DensityOperator::from_bloch).collect()
}

/// Distances `[ensemble-born, ensemble-defect, born-defect]` maximized over probe
/// states. The defect side is the full joint Lindblad solve traced over the defect.
fn cell(delta: f64, tau_c: f64, pulse: CompositePulse, defect_rates: Option<[f64; 2]>) -> telegraph::Result<[f64; 3]> {
    let spec = RtnSpec::new(delta, tau_c)?;
    let p = pulse.build(1.0)?;
    let horizon = p.duration();
    let drive = Drive::qubit_x(&p);
    let model = rtn_model(&spec, &p);
    let kernel = CorrelationKernel::exponential(delta, tau_c)?;
    let [g1, g2] = defect_rates.unwrap_or([spec.flip_rate(); 2]);
    let dm = DefectModel::new(drive.clone(), spec.coupling_axis.scale(delta), 0.0, g1, g2)?;
    let mut out = [0.0f64; 3];
    for rho0 in probe_states()? {
        let states = [
            evolve_average(&rho0, &model, horizon, Backend::Exact)?,
            evolve_born_exponential(&drive, &spec.coupling_axis, &kernel, &rho0, horizon)?.rho,
            partial_trace_defect(&evolve_defect_full(&dm, &stationary_joint_state(&dm, &rho0)?, horizon)?, 2)?,
        ];
        for (k, &(_, i, j)) in PAIRS.iter().enumerate() {
            out[k] = out[k].max(trace_distance(&states[i], &states[j])?);
        }
    }
    Ok(out)
}

pub fn run(cfg: &Config) -> Result<CheckReport, CliError> {
    let c = &cfg.check;
    let grid: Vec<(f64, f64, CompositePulse)> = c
        .deltas
        .iter()
        .flat_map(|&d| c.taus.iter().flat_map(move |&t| c.pulses.iter().map(move |&p| (d, t, p))))
        .collect();
    let dists: Vec<[f64; 3]> =
        grid.par_iter().map(|&(d, t, p)| cell(d, t, p, c.defect_rates)).collect::<telegraph::Result<_>>()?;
    let pairs = PAIRS
        .iter()
        .enumerate()
        .map(|(k, &(name, _, _))| {
            let mut w = PairWorst { pair: name, max_distance: f64::NEG_INFINITY, delta: 0.0, tau_c: 0.0, pulse: "" };
            for (&(d, t, p), v) in grid.iter().zip(&dists) {
                if v[k] > w.max_distance {
                    w = PairWorst { pair: name, max_distance: v[k], delta: d, tau_c: t, pulse: p.name() };
                }
            }
            w
        })
        .collect();
    Ok(CheckReport { pairs, threshold: c.threshold, cells: grid.len() })
}

pub fn write(cfg: &Config, report: &CheckReport) -> Result<PathBuf, CliError> {
    let pairs: Vec<Value> = report
        .pairs
        .iter()
        .map(|p| {
            json!({
                "pair": p.pair,
                "max_distance": p.max_distance,
                "worst_delta": p.delta,
                "worst_tau_c": p.tau_c,
                "worst_pulse": p.pulse,
            })
        })
        .collect();
    let body = json!({
        "pairs": pairs,
        "threshold": report.threshold,
        "cells": report.cells,
        "passed": report.passed(),
    });
    write_json(&cfg.output_dir(), "check_report.json", cfg, body)
}
