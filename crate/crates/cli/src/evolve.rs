//! `evolve`: average qubit state on a uniform time grid.

use std::path::PathBuf;

use telegraph::born::{evolve_born_sampled, CorrelationKernel};
use telegraph::defect::{evolve_defect_blocks, DefectModel};
use telegraph::drive::Drive;
use telegraph::ensemble::{average_state, evolve_sampled, init_ensemble, Backend};
use telegraph::montecarlo::{mc_average_sampled, McConfig};
use telegraph::noise::rtn_model;
use telegraph::operators::DensityOperator;

use crate::config::{Config, SolverKind};
use crate::output::{num, write_csv};
use crate::CliError;

/// Sampled average states, with the Monte Carlo error when sampled.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityOperator>,
    pub std_errors: Option<Vec<f64>>,
}

pub fn sample_times(horizon: f64, samples: usize) -> Vec<f64> {
    (0..=samples).map(|k| horizon * k as f64 / samples as f64).collect()
}

pub fn run(cfg: &Config) -> Result<Trajectory, CliError> {
    let spec = cfg.rtn_spec()?;
    let pulse = cfg.control_pulse()?;
    let rho0 = cfg.initial_rho()?;
    let horizon = cfg.evolve.horizon.unwrap_or(pulse.duration());
    let times = sample_times(horizon, cfg.evolve.samples);
    let model = rtn_model(&spec, &pulse);

    let (states, std_errors) = match cfg.solver {
        SolverKind::Ensemble => {
            let e0 = init_ensemble(&rho0, &model)?;
            let es = evolve_sampled(&e0, &model, &times, Backend::Exact)?;
            (es.iter().map(average_state).collect(), None)
        }
        SolverKind::Born => {
            let kernel = CorrelationKernel::exponential(spec.delta, spec.tau_c)?;
            let drive = Drive::qubit_x(&pulse);
            let ms = evolve_born_sampled(&drive, &spec.coupling_axis, &kernel, &rho0, &times)?;
            (ms.into_iter().map(|m| m.rho).collect(), None)
        }
        SolverKind::Defect => {
            let r = spec.flip_rate();
            let dm = DefectModel::new(Drive::qubit_x(&pulse), spec.coupling_axis.scale(spec.delta), 0.0, r, r)?;
            let states = times
                .iter()
                .map(|&t| evolve_defect_blocks(&dm, &rho0, t)?.system())
                .collect::<telegraph::Result<Vec<_>>>()?;
            (states, None)
        }
        SolverKind::Mc => {
            let mc = McConfig::new(cfg.mc.n_traj, cfg.require_seed("solver mc")?);
            let est = mc_average_sampled(&model, &rho0, &times, &mc)?;
            let errs = est.iter().map(|e| e.std_error).collect();
            (est.into_iter().map(|e| e.mean_state).collect(), Some(errs))
        }
    };
    Ok(Trajectory { times, states, std_errors })
}

pub fn columns(mc: bool) -> String {
    let mut cols = String::from("t");
    for i in 0..2 {
        for j in 0..2 {
            cols.push_str(&format!(",rho{i}{j}_re,rho{i}{j}_im"));
        }
    }
    if mc {
        cols.push_str(",std_error");
    }
    cols
}

pub fn write(cfg: &Config, tr: &Trajectory) -> Result<PathBuf, CliError> {
    let rows: Vec<String> = tr
        .times
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let m = tr.states[k].matrix();
            let mut row = num(*t);
            for i in 0..2 {
                for j in 0..2 {
                    row.push_str(&format!(",{},{}", num(m[(i, j)].re), num(m[(i, j)].im)));
                }
            }
            if let Some(errs) = &tr.std_errors {
                row.push_str(&format!(",{}", num(errs[k])));
            }
            row
        })
        .collect();
    write_csv(&cfg.output_dir(), "evolve.csv", cfg, &columns(tr.std_errors.is_some()), &rows)
}
