//! Coupled master equations for the conditional density operators.
//!
//! Each `ρ_k` is the system state averaged over the noise histories that sit
//! in state `k` at time `t`, weighted so that `Tr ρ_k = P_k`:
//!
//! ```text
//! ∂t ρ_k = -i [H_k(t), ρ_k] + Σ_j γ_kj ρ_j
//! ```
//!
//! and the physical state is `ρ = Σ_k ρ_k`. The exact backend stacks the
//! column-vectorized `ρ_k` (state-major: `[vec ρ_0; vec ρ_1; ...]`) and
//! exponentiates the `N d²` generator once per constant piece of the drive.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::drive::Piece;
use crate::error::{Error, Result};
use crate::noise::{stationary_distribution, MarkovNoiseModel};
use crate::operators::{
    c, expm, hamiltonian_superop, identity, symmetrize, unvectorize, vectorize, ComplexMatrix, DensityOperator,
    DRIFT_TOL,
};

/// Integration method for [`evolve_ensemble_with`].
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Backend {
    /// Exponentiate the stacked generator on every constant piece.
    Exact,
    /// Classical fourth-order Runge–Kutta. `None` picks
    /// `h = min(0.01, τ_min/100)` scaled down for large Hamiltonians.
    Rk4 { step: Option<f64> },
}

impl Backend {
    pub fn default_for(model: &MarkovNoiseModel) -> Self {
        if model.dim() <= 4 && model.n_states() <= 4 {
            Backend::Exact
        } else {
            Backend::Rk4 { step: None }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalEnsemble {
    parts: Vec<DensityOperator>,
    time: f64,
}

impl ConditionalEnsemble {
    pub fn parts(&self) -> &[DensityOperator] {
        &self.parts
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// `Tr ρ_k` for each noise state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.parts.iter().map(|p| p.weight()).collect()
    }

    fn stack(&self) -> DVector<Complex64> {
        let d2 = self.parts[0].dim().pow(2);
        let mut v = DVector::zeros(d2 * self.parts.len());
        for (k, p) in self.parts.iter().enumerate() {
            v.rows_mut(k * d2, d2).copy_from(&vectorize(p.matrix()));
        }
        v
    }

    fn from_stack(v: &DVector<Complex64>, n: usize, d: usize, time: f64) -> Result<Self> {
        let d2 = d * d;
        let parts = (0..n)
            .map(|k| DensityOperator::from_solver(unvectorize(v.rows(k * d2, d2).as_slice(), d)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConditionalEnsemble { parts, time })
    }
}

/// `ρ_k(0) = P_k ρ0` with `P` the stationary distribution of the noise.
pub fn init_ensemble(rho0: &DensityOperator, model: &MarkovNoiseModel) -> Result<ConditionalEnsemble> {
    let p = stationary_distribution(model)?;
    init_ensemble_with(rho0, &p)
}

/// `ρ_k(0) = P_k ρ0` for an explicit initial noise distribution.
pub fn init_ensemble_with(rho0: &DensityOperator, weights: &[f64]) -> Result<ConditionalEnsemble> {
    let tr = rho0.weight();
    if (tr - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidTrace(tr));
    }
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || weights.iter().any(|&w| w < 0.0) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("initial noise distribution {weights:?}")));
    }
    let parts =
        weights.iter().map(|&w| DensityOperator::from_solver(rho0.matrix() * c(w, 0.0))).collect::<Result<Vec<_>>>()?;
    Ok(ConditionalEnsemble { parts, time: 0.0 })
}

/// `Σ_k ρ_k`.
pub fn average_state(e: &ConditionalEnsemble) -> DensityOperator {
    let d = e.parts[0].dim();
    let sum = e.parts.iter().fold(ComplexMatrix::zeros(d, d), |acc, p| acc + p.matrix());
    DensityOperator::from_solver(sum).expect("sum of Hermitian parts")
}

/// Stacked generator for one constant piece of the drive.
pub fn ensemble_generator(model: &MarkovNoiseModel, piece: &Piece<'_>) -> ComplexMatrix {
    let n = model.n_states();
    let d = model.dim();
    let d2 = d * d;
    let id = identity(d2);
    let mut g = ComplexMatrix::zeros(n * d2, n * d2);
    for k in 0..n {
        let hk = piece.hamiltonian.add(&model.offsets()[k]).expect("dimensions validated");
        let block = hamiltonian_superop(hk.matrix());
        g.view_mut((k * d2, k * d2), (d2, d2)).copy_from(&block);
        for j in 0..n {
            let r = model.rates()[(k, j)];
            if r != 0.0 {
                let mut v = g.view_mut((k * d2, j * d2), (d2, d2));
                v += &id * c(r, 0.0);
            }
        }
    }
    g
}

pub fn evolve_ensemble(e: &ConditionalEnsemble, model: &MarkovNoiseModel, t1: f64) -> Result<ConditionalEnsemble> {
    evolve_ensemble_with(e, model, t1, Backend::default_for(model))
}

pub fn evolve_ensemble_with(
    e: &ConditionalEnsemble,
    model: &MarkovNoiseModel,
    t1: f64,
    backend: Backend,
) -> Result<ConditionalEnsemble> {
    if !(t1 >= e.time) {
        return Err(Error::NonMonotonicTime { t0: e.time, t1 });
    }
    if e.parts.len() != model.n_states() {
        return Err(Error::DimensionMismatch(model.n_states(), e.parts.len()));
    }
    if e.parts[0].dim() != model.dim() {
        return Err(Error::DimensionMismatch(model.dim(), e.parts[0].dim()));
    }
    match backend {
        Backend::Exact => evolve_exact(e, model, t1),
        Backend::Rk4 { step } => evolve_rk4(e, model, t1, step),
    }
}

fn evolve_exact(e: &ConditionalEnsemble, model: &MarkovNoiseModel, t1: f64) -> Result<ConditionalEnsemble> {
    let (n, d) = (model.n_states(), model.dim());
    let mut v = e.stack();
    for piece in model.drive().pieces(e.time, t1) {
        let g = ensemble_generator(model, &piece);
        let prop = expm(&(g * c(piece.duration, 0.0)))?;
        v = prop * v;
        // round-trip through the parts to symmetrize each ρ_k
        v = ConditionalEnsemble::from_stack(&v, n, d, 0.0)?.stack();
    }
    ConditionalEnsemble::from_stack(&v, n, d, t1)
}

fn rk4_step_size(model: &MarkovNoiseModel, t0: f64, t1: f64) -> f64 {
    let rate = model.max_rate();
    let mut h: f64 = 0.01;
    if rate > 0.0 {
        h = h.min(1.0 / rate / 100.0);
    }
    let hnorm = model
        .drive()
        .pieces(t0, t1)
        .iter()
        .flat_map(|p| model.offsets().iter().map(move |o| (p.hamiltonian.matrix() + o.matrix()).norm()))
        .fold(0.0, f64::max);
    if hnorm > 1.0 {
        h /= hnorm;
    }
    h
}

fn rhs(parts: &[ComplexMatrix], hams: &[ComplexMatrix], model: &MarkovNoiseModel) -> Vec<ComplexMatrix> {
    let n = parts.len();
    (0..n)
        .map(|k| {
            let h = &hams[k];
            let mut out = (h * &parts[k] - &parts[k] * h) * c(0.0, -1.0);
            for (j, pj) in parts.iter().enumerate() {
                let r = model.rates()[(k, j)];
                if r != 0.0 {
                    out += pj * c(r, 0.0);
                }
            }
            out
        })
        .collect()
}

fn axpy(x: &[ComplexMatrix], a: f64, y: &[ComplexMatrix]) -> Vec<ComplexMatrix> {
    x.iter().zip(y).map(|(xi, yi)| xi + yi * c(a, 0.0)).collect()
}

fn evolve_rk4(
    e: &ConditionalEnsemble,
    model: &MarkovNoiseModel,
    t1: f64,
    step: Option<f64>,
) -> Result<ConditionalEnsemble> {
    let h_max = step.unwrap_or_else(|| rk4_step_size(model, e.time, t1));
    if !(h_max > 1e-12) {
        return Err(Error::StepUnderflow(h_max));
    }
    let mut parts: Vec<ComplexMatrix> = e.parts.iter().map(|p| p.matrix().clone()).collect();
    for piece in model.drive().pieces(e.time, t1) {
        let hams: Vec<ComplexMatrix> =
            model.offsets().iter().map(|o| piece.hamiltonian.matrix() + o.matrix()).collect();
        let steps = (piece.duration / h_max).ceil().max(1.0) as usize;
        let h = piece.duration / steps as f64;
        for _ in 0..steps {
            let k1 = rhs(&parts, &hams, model);
            let k2 = rhs(&axpy(&parts, h / 2.0, &k1), &hams, model);
            let k3 = rhs(&axpy(&parts, h / 2.0, &k2), &hams, model);
            let k4 = rhs(&axpy(&parts, h, &k3), &hams, model);
            for k in 0..parts.len() {
                parts[k] += (&k1[k] + &k2[k] * c(2.0, 0.0) + &k3[k] * c(2.0, 0.0) + &k4[k]) * c(h / 6.0, 0.0);
                let drift = symmetrize(&mut parts[k]);
                if drift > DRIFT_TOL {
                    return Err(Error::HermiticityDrift(drift));
                }
            }
        }
    }
    let parts = parts.into_iter().map(DensityOperator::from_solver).collect::<Result<Vec<_>>>()?;
    Ok(ConditionalEnsemble { parts, time: t1 })
}

/// Evolve through each of `times` (non-decreasing) and return the
/// ensemble at every sample.
pub fn evolve_sampled(
    e: &ConditionalEnsemble,
    model: &MarkovNoiseModel,
    times: &[f64],
    backend: Backend,
) -> Result<Vec<ConditionalEnsemble>> {
    let mut cur = e.clone();
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        cur = evolve_ensemble_with(&cur, model, t, backend)?;
        out.push(cur.clone());
    }
    Ok(out)
}

/// Convenience: average state at `t1` starting from `ρ0` in the stationary split.
pub fn evolve_average(
    rho0: &DensityOperator,
    model: &MarkovNoiseModel,
    t1: f64,
    backend: Backend,
) -> Result<DensityOperator> {
    let e = init_ensemble(rho0, model)?;
    Ok(average_state(&evolve_ensemble_with(&e, model, t1, backend)?))
}
