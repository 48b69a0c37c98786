//! Gradient ascent of the NOT-gate fidelity over piecewise-constant controls.
//!
//! For a qubit under telegraph noise the identity components of the two
//! conditional operators only exchange population, so the fidelity depends
//! on the Bloch parts alone. Writing `ρ_± = (p_± I + x_± · σ)/2` with
//! `H_± = (h_± · σ)/2`,
//!
//! ```text
//! ẋ_± = h_± × x_± ∓ (x_+ - x_-)/τc,    h_± = a e_x ± 2Δ n
//! ```
//!
//! where `n` holds the Pauli components of the coupling axis. The six real
//! coordinates `(x_+, x_-)` evolve under `L(a) = L0 + a Lx`, and the
//! transfer block of the averaged map is `R = [I I] P [½I; ½I]` with `P`
//! the product of segment propagators.
//!
//! Segment derivatives come from the upper-right block of
//! `exp([[L dt, Lx dt], [0, L dt]])`.

use nalgebra::{Matrix3, SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::fidelity::{not_target, pauli_components, pauli_transfer_of_unitary};
use crate::noise::RtnSpec;
use crate::operators::{expm_generic, ComplexMatrix};
use crate::pulse::{CompositePulse, ControlPulse};

type M6 = SMatrix<f64, 6, 6>;
type M12 = SMatrix<f64, 12, 12>;

fn cross(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Reduced real model of a qubit gate under two-state telegraph noise.
#[derive(Clone, Debug, PartialEq)]
pub struct BlochProblem {
    l0: M6,
    lx: M6,
    /// `Φ = offset + Σ weight_ab P_ab`.
    weight: M6,
    offset: f64,
}

impl BlochProblem {
    /// Target gate `target` with control `a σx / 2`.
    pub fn new(spec: &RtnSpec, target: &ComplexMatrix) -> Result<Self> {
        if spec.coupling_axis.dim() != 2 {
            return Err(Error::NotQubit(spec.coupling_axis.dim()));
        }
        let dev = (target.adjoint() * target - ComplexMatrix::identity(2, 2)).norm();
        if target.nrows() != 2 || dev > 1e-9 {
            return Err(Error::NotUnitary(dev));
        }
        let comps = pauli_components(spec.coupling_axis.matrix()) * 0.5;
        let n = Vector3::new(comps[1], comps[2], comps[3]) * (2.0 * spec.delta);
        let r = spec.flip_rate();
        let mut l0 = M6::zeros();
        l0.fixed_view_mut::<3, 3>(0, 0).copy_from(&(cross(&n) - Matrix3::identity() * r));
        l0.fixed_view_mut::<3, 3>(3, 3).copy_from(&(cross(&-n) - Matrix3::identity() * r));
        l0.fixed_view_mut::<3, 3>(0, 3).copy_from(&(Matrix3::identity() * r));
        l0.fixed_view_mut::<3, 3>(3, 0).copy_from(&(Matrix3::identity() * r));
        let ex = cross(&Vector3::x());
        let mut lx = M6::zeros();
        lx.fixed_view_mut::<3, 3>(0, 0).copy_from(&ex);
        lx.fixed_view_mut::<3, 3>(3, 3).copy_from(&ex);

        // Φ = 1/2 + (1/6) Σ_ij RU_ij R_ij with R = A P B
        let ru_full = pauli_transfer_of_unitary(target);
        let ru: Matrix3<f64> = ru_full.fixed_view::<3, 3>(1, 1).into_owned();
        let mut a = SMatrix::<f64, 3, 6>::zeros();
        a.fixed_view_mut::<3, 3>(0, 0).copy_from(&Matrix3::identity());
        a.fixed_view_mut::<3, 3>(0, 3).copy_from(&Matrix3::identity());
        let b = a.transpose() * 0.5;
        let weight = (a.transpose() * ru * b.transpose()) / 6.0;
        Ok(BlochProblem { l0, lx, weight, offset: 0.5 })
    }

    /// NOT gate under `spec`.
    pub fn not_gate(spec: &RtnSpec) -> Result<Self> {
        Self::new(spec, &not_target())
    }

    fn generator(&self, a: f64) -> M6 {
        self.l0 + self.lx * a
    }

    fn segment(&self, a: f64, dt: f64) -> Result<M6> {
        expm_generic(&(self.generator(a) * dt))
    }

    /// Propagator and its amplitude derivative for one segment.
    fn segment_with_derivative(&self, a: f64, dt: f64) -> Result<(M6, M6)> {
        let l = self.generator(a) * dt;
        let mut aug = M12::zeros();
        aug.fixed_view_mut::<6, 6>(0, 0).copy_from(&l);
        aug.fixed_view_mut::<6, 6>(6, 6).copy_from(&l);
        aug.fixed_view_mut::<6, 6>(0, 6).copy_from(&(self.lx * dt));
        let e = expm_generic(&aug)?;
        Ok((e.fixed_view::<6, 6>(0, 0).into_owned(), e.fixed_view::<6, 6>(0, 6).into_owned()))
    }

    fn objective(&self, p: &M6) -> f64 {
        self.offset + self.weight.component_mul(p).sum()
    }

    pub fn fidelity(&self, pulse: &ControlPulse) -> Result<f64> {
        let mut p = M6::identity();
        for s in pulse.segments() {
            p = self.segment(s.amplitude, s.duration)? * p;
        }
        Ok(self.objective(&p))
    }

    /// Fidelity and its gradient with respect to each segment amplitude.
    pub fn fidelity_gradient(&self, pulse: &ControlPulse) -> Result<(f64, Vec<f64>)> {
        let n = pulse.len();
        let mut props = Vec::with_capacity(n);
        let mut derivs = Vec::with_capacity(n);
        for s in pulse.segments() {
            let (p, d) = self.segment_with_derivative(s.amplitude, s.duration)?;
            props.push(p);
            derivs.push(d);
        }
        // forward[k] = P_{k-1} ... P_0
        let mut forward = Vec::with_capacity(n + 1);
        forward.push(M6::identity());
        for p in &props {
            let last = *forward.last().unwrap();
            forward.push(p * last);
        }
        let fid = self.objective(&forward[n]);
        // Λ_k = (P_{n-1} ... P_{k+1})ᵀ W, accumulated backwards
        let mut grad = vec![0.0; n];
        let mut lambda = self.weight;
        for k in (0..n).rev() {
            grad[k] = (lambda * forward[k].transpose()).component_mul(&derivs[k]).sum();
            lambda = props[k].transpose() * lambda;
        }
        Ok((fid, grad))
    }
}

/// Fidelity gradient of the NOT gate.
pub fn fidelity_gradient(pulse: &ControlPulse, spec: &RtnSpec) -> Result<Vec<f64>> {
    Ok(BlochProblem::not_gate(spec)?.fidelity_gradient(pulse)?.1)
}

/// Settings for [`optimize_pulse`].
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationConfig {
    pub n_segments: usize,
    pub total_time: f64,
    pub a_max: f64,
    pub delta: f64,
    pub tau_c: f64,
    pub max_iters: usize,
    /// Stop once Φ has risen by less than this over `window` iterations.
    pub tolerance: f64,
    pub window: usize,
    /// Starting pulse; a constant pulse of area π on the grid above when `None`.
    pub initial: Option<ControlPulse>,
}

impl Default for OptimizationConfig {
    fn default() -> Self {
        OptimizationConfig {
            n_segments: 64,
            total_time: 7.0 * std::f64::consts::PI / 3.0,
            a_max: 1.0,
            delta: 0.125,
            tau_c: 5.0,
            max_iters: 2000,
            tolerance: 1e-10,
            window: 10,
            initial: None,
        }
    }
}

impl OptimizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_segments == 0 {
            return Err(Error::InvalidParameter("n_segments must be at least 1".into()));
        }
        if !(self.total_time > 0.0 && self.total_time.is_finite()) {
            return Err(Error::InvalidParameter(format!("total_time must be positive, got {}", self.total_time)));
        }
        if !(self.a_max > 0.0) {
            return Err(Error::InvalidParameter(format!("a_max must be positive, got {}", self.a_max)));
        }
        if self.window == 0 {
            return Err(Error::InvalidParameter("window must be at least 1".into()));
        }
        RtnSpec::new(self.delta, self.tau_c).map(|_| ())
    }

    pub fn spec(&self) -> Result<RtnSpec> {
        RtnSpec::new(self.delta, self.tau_c)
    }

    /// The pulse the optimizer starts from.
    pub fn initial_pulse(&self) -> Result<ControlPulse> {
        match &self.initial {
            Some(p) => Ok(p.clone()),
            None => {
                let a = (std::f64::consts::PI / self.total_time).min(self.a_max);
                ControlPulse::uniform(&vec![a; self.n_segments], self.total_time, self.a_max)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationResult {
    pub pulse: ControlPulse,
    pub fidelity: f64,
    pub iterations: usize,
    /// Φ of the start and of every accepted iterate.
    pub fidelity_history: Vec<f64>,
    pub converged: bool,
}

fn project(x: &[f64], a_max: f64) -> Vec<f64> {
    x.iter().map(|v| v.clamp(-a_max, a_max)).collect()
}

/// Projected gradient ascent with Barzilai–Borwein steps and an Armijo
/// backtracking line search, so every accepted step raises Φ.
pub fn optimize_pulse(config: &OptimizationConfig) -> Result<OptimizationResult> {
    config.validate()?;
    let problem = BlochProblem::not_gate(&config.spec()?)?;
    let start = config.initial_pulse()?;
    let a_max = start.a_max();
    let mut pulse = start.with_amplitudes(&project(&start.amplitudes(), a_max))?;
    let (mut fid, mut grad) = problem.fidelity_gradient(&pulse)?;
    let mut history = vec![fid];
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < config.max_iters {
        let x = pulse.amplitudes();
        let mut accepted = None;
        let mut alpha = step;
        for _ in 0..60 {
            let trial: Vec<f64> = project(&x.iter().zip(&grad).map(|(a, g)| a + alpha * g).collect::<Vec<_>>(), a_max);
            let ascent: f64 = trial.iter().zip(&x).zip(&grad).map(|((t, a), g)| (t - a) * g).sum();
            if ascent <= 0.0 {
                break;
            }
            let cand = pulse.with_amplitudes(&trial)?;
            let f = problem.fidelity(&cand)?;
            if f >= fid + 1e-4 * ascent {
                accepted = Some((cand, trial));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, trial)) = accepted else {
            // no ascent direction left inside the box
            converged = true;
            break;
        };
        let (f_new, g_new) = problem.fidelity_gradient(&cand)?;
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        // ascent on a locally concave objective has s·y < 0
        step = if sy < 0.0 { (ss / -sy).clamp(1e-6, 1e6) } else { (alpha * 2.0).min(1e6) };
        pulse = cand;
        fid = f_new;
        grad = g_new;
        history.push(fid);
        iterations += 1;
        if history.len() > config.window {
            let old = history[history.len() - 1 - config.window];
            if (fid - old).abs() < config.tolerance {
                converged = true;
                break;
            }
        }
    }
    Ok(OptimizationResult { pulse, fidelity: fid, iterations, fidelity_history: history, converged })
}

/// Starting pulses for a robust optimum: the constant pulse on the
/// configured grid, the π-pulse, and both CORPSE variants, each resampled
/// exactly onto roughly `n_segments` equal segments.
pub fn standard_starts(config: &OptimizationConfig) -> Result<Vec<(String, ControlPulse)>> {
    let mut out = vec![("stretched_pi".to_string(), config.initial_pulse()?)];
    for p in CompositePulse::ALL {
        let n = p.aligned_segments(config.n_segments);
        out.push((p.name().to_string(), p.build(config.a_max)?.resample(n)?));
    }
    Ok(out)
}

/// Optimize from each start and keep the best result (earliest on ties).
pub fn optimize_multistart(
    config: &OptimizationConfig,
    starts: &[(String, ControlPulse)],
) -> Result<(String, OptimizationResult)> {
    let mut best: Option<(String, OptimizationResult)> = None;
    for (name, pulse) in starts {
        let cfg = OptimizationConfig { initial: Some(pulse.clone()), ..config.clone() };
        let res = optimize_pulse(&cfg)?;
        if best.as_ref().is_none_or(|(_, b)| res.fidelity > b.fidelity) {
            best = Some((name.clone(), res));
        }
    }
    best.ok_or_else(|| Error::InvalidParameter("no starting pulses".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Backend;
    use crate::fidelity::{not_fidelity, Solver};
    use crate::pulse::{corpse_not, pi_pulse};

    #[test]
    fn matches_full_solver() {
        for (d, t) in [(0.125, 5.0), (0.25, 0.3), (0.4, 60.0)] {
            let spec = RtnSpec::new(d, t).unwrap();
            let prob = BlochProblem::not_gate(&spec).unwrap();
            for p in [pi_pulse(1.0).unwrap(), corpse_not(1.0).unwrap()] {
                let a = prob.fidelity(&p).unwrap();
                let b = not_fidelity(&Solver::Ensemble(Backend::Exact), &p, &spec).unwrap();
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn default_start_is_stretched_pi() {
        let cfg = OptimizationConfig::default();
        let p = cfg.initial_pulse().unwrap();
        assert_eq!(p.len(), 64);
        assert!((p.area() - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = OptimizationConfig { n_segments: 0, ..Default::default() };
        assert!(optimize_pulse(&cfg).is_err());
        let cfg = OptimizationConfig { tau_c: 0.0, ..Default::default() };
        assert!(optimize_pulse(&cfg).is_err());
    }
}
