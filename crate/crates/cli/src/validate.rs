//! `mc-validate`: sampled trajectories against the deterministic ensemble.

use std::path::PathBuf;

use telegraph::ensemble::{evolve_average, Backend};
use telegraph::fidelity::{not_fidelity, not_target, Solver};
use telegraph::montecarlo::{mc_state_and_fidelity, McConfig};
use telegraph::noise::{rtn_model, RtnSpec};
use telegraph::pulse::CompositePulse;

use crate::config::Config;
use crate::output::{num, write_csv};
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct McCell {
    pub delta: f64,
    pub tau_c: f64,
    pub pulse: &'static str,
    pub n_traj: usize,
    pub fidelity: f64,
    pub std_error: f64,
    pub deterministic: f64,
    /// `|Φ_mc − Φ| / σ`.
    pub fidelity_z: f64,
    /// Largest `|ρ_mc − ρ|_ij / σ_ij` over the final state.
    pub state_z: f64,
    /// Largest entry standard error of the final state.
    pub state_std_error: f64,
}

impl McCell {
    pub fn passed(&self, sigmas: f64, max_std_error: f64) -> bool {
        self.fidelity_z <= sigmas
            && self.state_z <= sigmas
            && self.std_error <= max_std_error
            && self.state_std_error <= max_std_error
    }
}

pub const COLUMNS: &str =
    "tau_c,pulse_name,delta,fidelity,n_traj,std_error,deterministic,fidelity_z,state_z,state_std_error";

fn z(diff: f64, err: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if err == 0.0 {
        f64::INFINITY
    } else {
        diff / err
    }
}

fn cell(cfg: &Config, seed: u64, delta: f64, tau_c: f64, pulse: CompositePulse) -> telegraph::Result<McCell> {
    let m = &cfg.mc_validate;
    let spec = RtnSpec::new(delta, tau_c)?;
    let p = pulse.build(1.0)?;
    let model = rtn_model(&spec, &p);
    let rho0 = cfg.initial_rho().map_err(|e| telegraph::Error::InvalidParameter(e.to_string()))?;
    let horizon = p.duration();
    let (state, fid) = mc_state_and_fidelity(&model, &rho0, horizon, &not_target(), &McConfig::new(m.n_traj, seed))?;
    let exact_state = evolve_average(&rho0, &model, horizon, Backend::Exact)?;
    let exact_fid = not_fidelity(&Solver::Ensemble(Backend::Exact), &p, &spec)?;
    let diff = state.mean_state.matrix() - exact_state.matrix();
    let mut state_z = 0.0f64;
    for (d, e) in diff.iter().zip(state.entry_errors.iter()) {
        state_z = state_z.max(z(d.norm(), *e));
    }
    Ok(McCell {
        delta,
        tau_c,
        pulse: pulse.name(),
        n_traj: m.n_traj,
        fidelity: fid.fidelity,
        std_error: fid.std_error,
        deterministic: exact_fid,
        fidelity_z: z((fid.fidelity - exact_fid).abs(), fid.std_error),
        state_z,
        state_std_error: state.std_error,
    })
}

/// Cells ordered by `Δ`, then `τc`, then pulse. Each cell is seeded from the
/// run seed and its index, so cells use independent streams.
pub fn run(cfg: &Config) -> Result<Vec<McCell>, CliError> {
    let seed = cfg.require_seed("mc-validate")?;
    let m = &cfg.mc_validate;
    let mut cells = Vec::new();
    let mut index = 0u64;
    for &d in &m.deltas {
        for &t in &m.taus {
            for &p in &m.pulses {
                let s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index);
                cells.push(cell(cfg, s, d, t, p)?);
                index += 1;
            }
        }
    }
    Ok(cells)
}

pub fn write(cfg: &Config, cells: &[McCell]) -> Result<PathBuf, CliError> {
    let rows: Vec<String> = cells
        .iter()
        .map(|c| {
            format!(
                "{},{},{},{},{},{},{},{},{},{}",
                num(c.tau_c),
                c.pulse,
                num(c.delta),
                num(c.fidelity),
                c.n_traj,
                num(c.std_error),
                num(c.deterministic),
                num(c.fidelity_z),
                num(c.state_z),
                num(c.state_std_error),
            )
        })
        .collect();
    write_csv(&cfg.output_dir(), "mc_validate.csv", cfg, COLUMNS, &rows)
}
