//! JSON experiment configuration with command-line overrides.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use telegraph::ensemble::Backend;
use telegraph::fidelity::Solver;
use telegraph::grape::OptimizationConfig;
use telegraph::noise::RtnSpec;
use telegraph::operators::DensityOperator;
use telegraph::pulse::{CompositePulse, ControlPulse};

use crate::CliError;

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Ensemble,
    Born,
    Defect,
    Mc,
}

/// Everything any subcommand reads. Every section is optional in the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: Option<u64>,
    pub solver: SolverKind,
    #[serde(skip_serializing)]
    pub jobs: Option<usize>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub noise: NoiseConfig,
    pub pulse: PulseConfig,
    /// Bloch vector of the initial qubit state.
    pub initial_state: [f64; 3],
    pub evolve: EvolveConfig,
    pub mc: McSettings,
    pub optimize: OptimizeConfig,
    pub fig1: Fig1Config,
    pub fig2: Fig2Config,
    pub check: CheckConfig,
    pub mc_validate: McValidateConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: None,
            solver: SolverKind::Ensemble,
            jobs: None,
            out: None,
            noise: NoiseConfig::default(),
            pulse: PulseConfig::Composite(CompositePulse::Pi),
            initial_state: [0.0, 0.0, 1.0],
            evolve: EvolveConfig::default(),
            mc: McSettings::default(),
            optimize: OptimizeConfig::default(),
            fig1: Fig1Config::default(),
            fig2: Fig2Config::default(),
            check: CheckConfig::default(),
            mc_validate: McValidateConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    pub delta: f64,
    pub tau_c: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { delta: 0.125, tau_c: 5.0 }
    }
}

/// A named composite sequence or explicit equal-length segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PulseConfig {
    Composite(CompositePulse),
    Custom(CustomPulse),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomPulse {
    pub amplitudes: Vec<f64>,
    pub total_time: f64,
    #[serde(default = "one")]
    pub a_max: f64,
}

fn one() -> f64 {
    1.0
}

impl PulseConfig {
    pub fn name(&self) -> String {
        match self {
            PulseConfig::Composite(p) => p.name().to_string(),
            PulseConfig::Custom(_) => "custom".to_string(),
        }
    }

    pub fn build(&self) -> telegraph::Result<ControlPulse> {
        match self {
            PulseConfig::Composite(p) => p.build(1.0),
            PulseConfig::Custom(c) => ControlPulse::uniform(&c.amplitudes, c.total_time, c.a_max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    /// Defaults to the pulse duration.
    pub horizon: Option<f64>,
    /// Number of equal intervals; `samples + 1` rows are written.
    pub samples: usize,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig { horizon: None, samples: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSettings {
    pub n_traj: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings { n_traj: 100_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizeConfig {
    pub n_segments: usize,
    pub total_time: f64,
    pub a_max: f64,
    pub delta: f64,
    pub tau_c: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub window: usize,
    /// Also start from the composite sequences and keep the best.
    pub multistart: bool,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        let d = OptimizationConfig::default();
        OptimizeConfig {
            n_segments: d.n_segments,
            total_time: d.total_time,
            a_max: d.a_max,
            delta: d.delta,
            tau_c: d.tau_c,
            max_iters: d.max_iters,
            tolerance: d.tolerance,
            window: d.window,
            multistart: true,
        }
    }
}

impl OptimizeConfig {
    /// Optimizer settings at the given noise point.
    pub fn at(&self, delta: f64, tau_c: f64) -> OptimizationConfig {
        OptimizationConfig {
            n_segments: self.n_segments,
            total_time: self.total_time,
            a_max: self.a_max,
            delta,
            tau_c,
            max_iters: self.max_iters,
            tolerance: self.tolerance,
            window: self.window,
            initial: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig1Config {
    pub deltas: Vec<f64>,
    pub tau_min: f64,
    pub tau_max: f64,
    pub n_tau: usize,
    pub optimize: bool,
}

impl Default for Fig1Config {
    fn default() -> Self {
        Fig1Config { deltas: vec![0.125, 0.25], tau_min: 0.1, tau_max: 100.0, n_tau: 30, optimize: true }
    }
}

impl Fig1Config {
    /// Log-spaced correlation times including both ends.
    pub fn taus(&self) -> Vec<f64> {
        log_grid(self.tau_min, self.tau_max, self.n_tau)
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig2Config {
    pub delta: f64,
    pub taus: Vec<f64>,
    /// Segments with `|a|` at or below this are ignored when counting sign changes.
    pub sign_threshold: f64,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Fig2Config { delta: 0.125, taus: vec![5.0, 20.0, 50.0], sign_threshold: 0.05 }
    }
}

const GRID_DELTAS: [f64; 5] = [0.05, 0.1, 0.125, 0.2, 0.25];
const GRID_TAUS: [f64; 5] = [0.5, 2.0, 5.0, 20.0, 50.0];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    pub deltas: Vec<f64>,
    pub taus: Vec<f64>,
    pub pulses: Vec<CompositePulse>,
    pub threshold: f64,
    /// Replace the defect rates `[Γ1, Γ2]` (normally both `1/τc`).
    pub defect_rates: Option<[f64; 2]>,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            deltas: GRID_DELTAS.to_vec(),
            taus: GRID_TAUS.to_vec(),
            pulses: CompositePulse::ALL.to_vec(),
            threshold: 1e-7,
            defect_rates: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McValidateConfig {
    pub deltas: Vec<f64>,
    pub taus: Vec<f64>,
    pub pulses: Vec<CompositePulse>,
    pub n_traj: usize,
    /// Allowed deviation in standard errors.
    pub sigmas: f64,
    pub max_std_error: f64,
}

impl Default for McValidateConfig {
    fn default() -> Self {
        McValidateConfig {
            deltas: GRID_DELTAS.to_vec(),
            taus: GRID_TAUS.to_vec(),
            pulses: CompositePulse::ALL.to_vec(),
            n_traj: 100_000,
            sigmas: 3.0,
            max_std_error: 2e-3,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub solver: Option<SolverKind>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Parse a config document; errors name the offending key.
pub fn parse_config(text: &str) -> Result<Config, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

pub fn load_config(path: Option<&Path>, overrides: &Overrides) -> Result<Config, CliError> {
    let mut cfg = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            parse_config(&text)?
        }
        None => Config::default(),
    };
    if overrides.seed.is_some() {
        cfg.seed = overrides.seed;
    }
    if let Some(s) = overrides.solver {
        cfg.solver = s;
    }
    if overrides.jobs.is_some() {
        cfg.jobs = overrides.jobs;
    }
    if overrides.out.is_some() {
        cfg.out = overrides.out.clone();
    }
    Ok(cfg)
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn check_grid(name: &str, values: &[f64], allow_zero: bool) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(bad(format!("{name} must not be empty")));
    }
    for &v in values {
        let ok = v.is_finite() && if allow_zero { v >= 0.0 } else { v > 0.0 };
        if !ok {
            return Err(bad(format!("{name} contains invalid value {v}")));
        }
    }
    Ok(())
}

impl Config {
    pub fn output_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn rtn_spec(&self) -> Result<RtnSpec, CliError> {
        RtnSpec::new(self.noise.delta, self.noise.tau_c).map_err(|e| bad(format!("noise: {e}")))
    }

    pub fn control_pulse(&self) -> Result<ControlPulse, CliError> {
        self.pulse.build().map_err(|e| bad(format!("pulse: {e}")))
    }

    pub fn initial_rho(&self) -> Result<DensityOperator, CliError> {
        let v = Vector3::from(self.initial_state);
        DensityOperator::from_bloch(&v).map_err(|e| bad(format!("initial_state: {e}")))
    }

    pub fn require_seed(&self, what: &str) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| bad(format!("{what} is stochastic and needs a seed (--seed or \"seed\")")))
    }

    /// The library solver selected by `solver`.
    pub fn solver(&self) -> Result<Solver, CliError> {
        Ok(match self.solver {
            SolverKind::Ensemble => Solver::Ensemble(Backend::Exact),
            SolverKind::Born => Solver::Born,
            SolverKind::Defect => Solver::Defect,
            SolverKind::Mc => Solver::MonteCarlo { n_traj: self.mc.n_traj, seed: self.require_seed("solver mc")? },
        })
    }

    /// Checks shared by every command.
    pub fn validate_common(&self) -> Result<(), CliError> {
        if self.jobs == Some(0) {
            return Err(bad("jobs must be at least 1"));
        }
        if self.mc.n_traj < 2 {
            return Err(bad("mc.n_traj must be at least 2"));
        }
        self.rtn_spec()?;
        self.control_pulse()?;
        self.initial_rho()?;
        if self.solver == SolverKind::Mc {
            self.require_seed("solver mc")?;
        }
        let o = &self.optimize;
        o.at(o.delta, o.tau_c).validate().map_err(|e| bad(format!("optimize: {e}")))?;
        Ok(())
    }

    pub fn validate_evolve(&self) -> Result<(), CliError> {
        if self.evolve.samples == 0 {
            return Err(bad("evolve.samples must be at least 1"));
        }
        if let Some(h) = self.evolve.horizon {
            if !(h >= 0.0 && h.is_finite()) {
                return Err(bad(format!("evolve.horizon must be non-negative, got {h}")));
            }
        }
        Ok(())
    }

    pub fn validate_fig1(&self) -> Result<(), CliError> {
        let f = &self.fig1;
        check_grid("fig1.deltas", &f.deltas, true)?;
        check_grid("fig1.tau_min", &[f.tau_min, f.tau_max], false)?;
        if f.tau_max < f.tau_min {
            return Err(bad("fig1.tau_max must not be below fig1.tau_min"));
        }
        if f.n_tau == 0 {
            return Err(bad("fig1.n_tau must be at least 1"));
        }
        Ok(())
    }

    pub fn validate_fig2(&self) -> Result<(), CliError> {
        check_grid("fig2.delta", &[self.fig2.delta], true)?;
        check_grid("fig2.taus", &self.fig2.taus, false)
    }

    pub fn validate_check(&self) -> Result<(), CliError> {
        let c = &self.check;
        check_grid("check.deltas", &c.deltas, true)?;
        check_grid("check.taus", &c.taus, false)?;
        if c.pulses.is_empty() {
            return Err(bad("check.pulses must not be empty"));
        }
        if let Some(r) = c.defect_rates {
            check_grid("check.defect_rates", &r, true)?;
            if r[0] + r[1] <= 0.0 {
                return Err(bad("check.defect_rates must not both be zero"));
            }
        }
        if !(c.threshold >= 0.0) {
            return Err(bad("check.threshold must be non-negative"));
        }
        Ok(())
    }

    pub fn validate_mc(&self) -> Result<(), CliError> {
        let m = &self.mc_validate;
        self.require_seed("mc-validate")?;
        check_grid("mc_validate.deltas", &m.deltas, true)?;
        check_grid("mc_validate.taus", &m.taus, false)?;
        if m.pulses.is_empty() {
            return Err(bad("mc_validate.pulses must not be empty"));
        }
        if m.n_traj < 2 {
            return Err(bad("mc_validate.n_traj must be at least 2"));
        }
        if !(m.sigmas > 0.0) || !(m.max_std_error > 0.0) {
            return Err(bad("mc_validate.sigmas and max_std_error must be positive"));
        }
        Ok(())
    }

    /// Compact JSON of the resolved configuration, without `jobs` and `out`.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}
