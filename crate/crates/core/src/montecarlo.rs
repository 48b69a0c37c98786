//! Trajectory sampling of the classical noise.
//!
//! Each trajectory draws a noise realization, builds the exact piecewise
//! unitary between noise jumps and drive breakpoints, and contributes a set
//! of real observables. Sums run over fixed chunks of trajectory indices and
//! the chunk totals are added in index order, so results depend only on the
//! seed and the trajectory count.

use nalgebra::{DMatrix, DVector, Matrix4};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fidelity::{pauli_transfer_of_unitary, unitary_fidelity, ProcessMap};
use crate::noise::{sample_trajectory_from, stationary_distribution, trajectory_rng, MarkovNoiseModel};
use crate::operators::{c, identity, ComplexMatrix, DensityOperator};

const CHUNK: usize = 512;

/// Sampling controls.
#[derive(Clone, Debug, PartialEq)]
pub struct McConfig {
    pub n_traj: usize,
    pub seed: u64,
    /// Initial noise distribution; the stationary one when `None`.
    pub initial: Option<Vec<f64>>,
}

impl McConfig {
    pub fn new(n_traj: usize, seed: u64) -> Self {
        McConfig { n_traj, seed, initial: None }
    }
}

/// Sample mean of the state with its statistical error.
#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub mean_state: DensityOperator,
    /// Largest standard error over matrix entries.
    pub std_error: f64,
    /// Standard error of each entry, real and imaginary parts combined.
    pub entry_errors: DMatrix<f64>,
    pub n_traj: usize,
    pub time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FidelityEstimate {
    pub fidelity: f64,
    pub std_error: f64,
    pub n_traj: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McProcessMap {
    pub map: ProcessMap,
    pub std_errors: Matrix4<f64>,
    pub n_traj: usize,
}

/// Eigen-decomposed Hamiltonian: `exp(-iHt) = V diag(exp(-iλt)) V†`.
struct Spectral {
    vectors: ComplexMatrix,
    vectors_adj: ComplexMatrix,
    values: DVector<f64>,
}

impl Spectral {
    fn new(h: &ComplexMatrix) -> Self {
        let eig = h.clone().symmetric_eigen();
        let vectors = eig.eigenvectors;
        Spectral { vectors_adj: vectors.adjoint(), vectors, values: eig.eigenvalues }
    }

    /// `u ← exp(-iHt) u`.
    fn apply(&self, t: f64, u: &mut ComplexMatrix, scratch: &mut ComplexMatrix) {
        self.vectors_adj.mul_to(u, scratch);
        for (i, lam) in self.values.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -lam * t);
            for j in 0..scratch.ncols() {
                scratch[(i, j)] *= phase;
            }
        }
        self.vectors.mul_to(scratch, u);
    }
}

/// Fixed data shared by all trajectories of one run.
struct Plan<'a> {
    model: &'a MarkovNoiseModel,
    initial: Vec<f64>,
    /// `(start, duration, piece index)` covering `[0, horizon]`.
    pieces: Vec<(f64, f64, usize)>,
    /// `spectra[piece][noise state]`.
    spectra: Vec<Vec<Spectral>>,
    times: Vec<f64>,
    horizon: f64,
}

impl<'a> Plan<'a> {
    fn new(model: &'a MarkovNoiseModel, times: &[f64], initial: Option<&[f64]>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidParameter("no sample times".into()));
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times[0] < 0.0 {
            return Err(Error::InvalidParameter("sample times must be non-negative and non-decreasing".into()));
        }
        let initial = match initial {
            Some(p) => {
                let total: f64 = p.iter().sum();
                if p.len() != model.n_states() || p.iter().any(|&x| x < 0.0) || (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!("initial noise distribution {p:?}")));
                }
                p.to_vec()
            }
            None => stationary_distribution(model)?,
        };
        let horizon = *times.last().unwrap();
        let drive = model.drive();
        let n_pieces = drive.segments().len() + 1;
        let spectra = (0..n_pieces)
            .map(|k| {
                let h = if k < drive.segments().len() { &drive.segments()[k].1 } else { drive.rest() };
                model.offsets().iter().map(|o| Spectral::new(&(h.matrix() + o.matrix()))).collect()
            })
            .collect();
        let pieces = drive.pieces(0.0, horizon).iter().map(|p| (p.start, p.duration, p.index)).collect();
        Ok(Plan { model, initial, pieces, spectra, times: times.to_vec(), horizon })
    }

    /// Unitaries of one trajectory at each sample time.
    fn unitaries(&self, index: u64, seed: u64) -> Vec<ComplexMatrix> {
        let d = self.model.dim();
        let mut rng = trajectory_rng(seed, index);
        let horizon = if self.horizon > 0.0 { self.horizon } else { f64::MIN_POSITIVE };
        let traj = sample_trajectory_from(self.model.rates(), &self.initial, horizon, &mut rng);
        let mut u = identity(d);
        let mut scratch = ComplexMatrix::zeros(d, d);
        let mut out = Vec::with_capacity(self.times.len());
        let mut next_time = 0;
        let mut state = traj.initial_state;
        let mut jump = 0;
        let mut t = 0.0;
        while next_time < self.times.len() && self.times[next_time] <= t {
            out.push(u.clone());
            next_time += 1;
        }
        for &(start, duration, index) in &self.pieces {
            let end = start + duration;
            while t < end {
                let mut stop = end;
                if jump < traj.switch_times.len() && traj.switch_times[jump] < stop {
                    stop = traj.switch_times[jump];
                }
                if next_time < self.times.len() && self.times[next_time] < stop {
                    stop = self.times[next_time];
                }
                if stop > t {
                    self.spectra[index][state].apply(stop - t, &mut u, &mut scratch);
                }
                t = stop;
                while jump < traj.switch_times.len() && traj.switch_times[jump] <= t {
                    state = traj.states[jump];
                    jump += 1;
                }
                while next_time < self.times.len() && self.times[next_time] <= t {
                    out.push(u.clone());
                    next_time += 1;
                }
            }
        }
        while out.len() < self.times.len() {
            out.push(u.clone());
        }
        out
    }
}

/// Mean and standard error of per-trajectory observables. Deviations are
/// taken from trajectory 0 so identical trajectories give exactly zero error.
fn accumulate<F>(plan: &Plan<'_>, cfg: &McConfig, n_obs: usize, observe: F) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&[ComplexMatrix], &mut [f64]) + Sync,
{
    if cfg.n_traj < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 trajectories, got {}", cfg.n_traj)));
    }
    let mut shift = vec![0.0; n_obs];
    observe(&plan.unitaries(0, cfg.seed), &mut shift);
    let n_chunks = cfg.n_traj.div_ceil(CHUNK);
    let partial: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut s1 = vec![0.0; n_obs];
            let mut s2 = vec![0.0; n_obs];
            let mut buf = vec![0.0; n_obs];
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(cfg.n_traj);
            for i in lo..hi {
                observe(&plan.unitaries(i as u64, cfg.seed), &mut buf);
                for k in 0..n_obs {
                    let x = buf[k] - shift[k];
                    s1[k] += x;
                    s2[k] += x * x;
                }
            }
            (s1, s2)
        })
        .collect();
    let mut s1 = vec![0.0; n_obs];
    let mut s2 = vec![0.0; n_obs];
    for (a, b) in &partial {
        for k in 0..n_obs {
            s1[k] += a[k];
            s2[k] += b[k];
        }
    }
    let n = cfg.n_traj as f64;
    let mean = (0..n_obs).map(|k| shift[k] + s1[k] / n).collect();
    let err = (0..n_obs)
        .map(|k| {
            let var = ((s2[k] - s1[k] * s1[k] / n) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        })
        .collect();
    Ok((mean, err))
}

fn state_estimates(
    rho0: &DensityOperator,
    times: &[f64],
    n_traj: usize,
    mean: &[f64],
    err: &[f64],
) -> Result<Vec<McEstimate>> {
    let d = rho0.dim();
    let d2 = d * d;
    times
        .iter()
        .enumerate()
        .map(|(s, &t)| {
            let base = 2 * d2 * s;
            let m = ComplexMatrix::from_fn(d, d, |i, j| {
                let e = base + 2 * (i + d * j);
                c(mean[e], mean[e + 1])
            });
            let entry_errors = DMatrix::from_fn(d, d, |i, j| {
                let e = base + 2 * (i + d * j);
                err[e].hypot(err[e + 1])
            });
            let std_error = entry_errors.iter().cloned().fold(0.0, f64::max);
            Ok(McEstimate { mean_state: DensityOperator::from_solver(m)?, std_error, entry_errors, n_traj, time: t })
        })
        .collect()
}

fn push_state(u: &ComplexMatrix, rho0: &ComplexMatrix, out: &mut [f64]) {
    let r = u * rho0 * u.adjoint();
    for (k, z) in r.iter().enumerate() {
        out[2 * k] = z.re;
        out[2 * k + 1] = z.im;
    }
}

/// Trajectory average of `U ρ0 U†` at each sample time.
pub fn mc_average_sampled(
    model: &MarkovNoiseModel,
    rho0: &DensityOperator,
    times: &[f64],
    cfg: &McConfig,
) -> Result<Vec<McEstimate>> {
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch(model.dim(), rho0.dim()));
    }
    let plan = Plan::new(model, times, cfg.initial.as_deref())?;
    let d2 = rho0.dim().pow(2);
    let r0 = rho0.matrix();
    let (mean, err) = accumulate(&plan, cfg, 2 * d2 * times.len(), |us, out| {
        for (s, u) in us.iter().enumerate() {
            push_state(u, r0, &mut out[2 * d2 * s..2 * d2 * (s + 1)]);
        }
    })?;
    state_estimates(rho0, times, cfg.n_traj, &mean, &err)
}

pub fn mc_average_evolution(
    model: &MarkovNoiseModel,
    rho0: &DensityOperator,
    horizon: f64,
    cfg: &McConfig,
) -> Result<McEstimate> {
    Ok(mc_average_sampled(model, rho0, &[horizon], cfg)?.remove(0))
}

fn check_target(target: &ComplexMatrix, d: usize) -> Result<()> {
    if target.nrows() != d || target.ncols() != d {
        return Err(Error::DimensionMismatch(d, target.nrows()));
    }
    let dev = (target.adjoint() * target - identity(d)).norm();
    if dev > 1e-9 {
        return Err(Error::NotUnitary(dev));
    }
    Ok(())
}

/// Average gate fidelity to `target`. Each trajectory is unitary and the
/// fidelity is linear in the averaged map, so the estimate is the mean of
/// per-trajectory fidelities and its error is their standard error.
pub fn mc_gate_fidelity(
    model: &MarkovNoiseModel,
    horizon: f64,
    target: &ComplexMatrix,
    cfg: &McConfig,
) -> Result<FidelityEstimate> {
    check_target(target, model.dim())?;
    let plan = Plan::new(model, &[horizon], cfg.initial.as_deref())?;
    let (mean, err) = accumulate(&plan, cfg, 1, |us, out| out[0] = unitary_fidelity(&us[0], target))?;
    Ok(FidelityEstimate { fidelity: mean[0], std_error: err[0], n_traj: cfg.n_traj })
}

/// Mean Pauli transfer matrix over trajectories (qubits only).
pub fn mc_process_map(model: &MarkovNoiseModel, horizon: f64, cfg: &McConfig) -> Result<McProcessMap> {
    if model.dim() != 2 {
        return Err(Error::NotQubit(model.dim()));
    }
    let plan = Plan::new(model, &[horizon], cfg.initial.as_deref())?;
    let (mean, err) = accumulate(&plan, cfg, 16, |us, out| {
        out.copy_from_slice(pauli_transfer_of_unitary(&us[0]).as_slice());
    })?;
    Ok(McProcessMap {
        map: ProcessMap::from_matrix(Matrix4::from_column_slice(&mean)),
        std_errors: Matrix4::from_column_slice(&err),
        n_traj: cfg.n_traj,
    })
}

/// State and gate fidelity from the same trajectories.
pub fn mc_state_and_fidelity(
    model: &MarkovNoiseModel,
    rho0: &DensityOperator,
    horizon: f64,
    target: &ComplexMatrix,
    cfg: &McConfig,
) -> Result<(McEstimate, FidelityEstimate)> {
    check_target(target, model.dim())?;
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch(model.dim(), rho0.dim()));
    }
    let plan = Plan::new(model, &[horizon], cfg.initial.as_deref())?;
    let d2 = rho0.dim().pow(2);
    let r0 = rho0.matrix();
    let (mean, err) = accumulate(&plan, cfg, 2 * d2 + 1, |us, out| {
        push_state(&us[0], r0, &mut out[..2 * d2]);
        out[2 * d2] = unitary_fidelity(&us[0], target);
    })?;
    let state = state_estimates(rho0, &[horizon], cfg.n_traj, &mean[..2 * d2], &err[..2 * d2])?.remove(0);
    let fid = FidelityEstimate { fidelity: mean[2 * d2], std_error: err[2 * d2], n_traj: cfg.n_traj };
    Ok((state, fid))
}
