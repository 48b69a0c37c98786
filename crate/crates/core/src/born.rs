//! Second-order (Born) memory-kernel dynamics.
//!
//! With system coupling `g K`, the reduced state in the interaction picture
//! obeys
//!
//! ```text
//! ∂t ρ̃(t) = -g² ∫₀ᵗ ( [K̃(t), K̃(s) ρ̃(s)] C(t-s, 0) - [K̃(t), ρ̃(s) K̃(s)] C(0, t-s) ) ds
//! ```
//!
//! where `C(u, 0)` and `C(0, u)` are the forward and backward bath
//! autocorrelations. The environment itself never appears; only the kernel
//! does. The first-order term vanishes because the bath coupling operator has
//! zero mean.
//!
//! For the exponential kernel `C(u) = exp(-2|u|/τc)` (equal forward and
//! backward parts) the history integral can be carried as an auxiliary
//! operator `A(t)`, which closes the system locally in the Schrödinger
//! picture:
//!
//! ```text
//! ∂t ρ = -i[H_s, ρ] - i g [K, A]
//! ∂t A = -(2/τc) A - i[H_s, A] - i g [K, ρ],     A(0) = 0
//! ```
//!
//! Then `ρ_± = (ρ ± A)/2` are exactly the conditional operators of telegraph
//! noise with `H_± = H_s ± g K` and flip rate `1/τc`. With this sign
//! convention `A = ρ_+ - ρ_-` is Hermitian and traceless.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::drive::Drive;
use crate::error::{Error, Result};
use crate::operators::{
    c, expm, hamiltonian_superop, identity, symmetrize, unitary, unvectorize, vectorize, ComplexMatrix,
    DensityOperator, Hermitian, DRIFT_TOL,
};

/// Bath autocorrelation together with the coupling strength `g`.
#[derive(Clone, Debug, PartialEq)]
pub enum CorrelationKernel {
    /// `C(u, 0) = C(0, u) = exp(-2|u|/τc)`.
    Exponential { g: f64, tau_c: f64 },
    /// Samples of `C(u, 0)` and `C(0, u)` at `u = k dt`, linearly interpolated.
    Tabulated { g: f64, forward: Vec<Complex64>, backward: Vec<Complex64>, dt: f64 },
}

impl CorrelationKernel {
    pub fn exponential(g: f64, tau_c: f64) -> Result<Self> {
        let k = CorrelationKernel::Exponential { g, tau_c };
        k.validate()?;
        Ok(k)
    }

    pub fn tabulated(g: f64, forward: Vec<Complex64>, backward: Vec<Complex64>, dt: f64) -> Result<Self> {
        let k = CorrelationKernel::Tabulated { g, forward, backward, dt };
        k.validate()?;
        Ok(k)
    }

    /// Sample any pair of functions onto a table covering `[0, horizon]`.
    pub fn sampled(
        g: f64,
        horizon: f64,
        dt: f64,
        forward: impl Fn(f64) -> Complex64,
        backward: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let n = (horizon / dt).ceil() as usize + 1;
        let f = (0..n).map(|k| forward(k as f64 * dt)).collect();
        let b = (0..n).map(|k| backward(k as f64 * dt)).collect();
        Self::tabulated(g, f, b, dt)
    }

    pub fn g(&self) -> f64 {
        match self {
            CorrelationKernel::Exponential { g, .. } | CorrelationKernel::Tabulated { g, .. } => *g,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.g().is_finite() {
            return Err(Error::InvalidKernel("coupling g is not finite".into()));
        }
        match self {
            CorrelationKernel::Exponential { tau_c, .. } => {
                if !(*tau_c > 0.0 && tau_c.is_finite()) {
                    return Err(Error::InvalidKernel(format!("tau_c must be positive, got {tau_c}")));
                }
            }
            CorrelationKernel::Tabulated { forward, backward, dt, .. } => {
                if !(*dt > 0.0 && dt.is_finite()) {
                    return Err(Error::InvalidKernel(format!("dt must be positive, got {dt}")));
                }
                if forward.is_empty() || forward.len() != backward.len() {
                    return Err(Error::InvalidKernel(format!(
                        "forward/backward tables have lengths {} and {}",
                        forward.len(),
                        backward.len()
                    )));
                }
                if forward.iter().chain(backward).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::InvalidKernel("non-finite kernel sample".into()));
                }
                // C(0, u) = C(u, 0)* keeps the reduced dynamics Hermitian
                let worst = forward.iter().zip(backward).map(|(f, b)| (f.conj() - b).norm()).fold(0.0, f64::max);
                if worst > 1e-12 {
                    return Err(Error::InvalidKernel(format!(
                        "backward table must be the conjugate of the forward table (deviation {worst:e})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest lag at which the kernel is defined.
    pub fn support(&self) -> f64 {
        match self {
            CorrelationKernel::Exponential { .. } => f64::INFINITY,
            CorrelationKernel::Tabulated { forward, dt, .. } => (forward.len() - 1) as f64 * dt,
        }
    }

    fn interp(table: &[Complex64], dt: f64, u: f64) -> Complex64 {
        let x = u / dt;
        let k = x.floor() as usize;
        if k + 1 >= table.len() {
            return table[table.len() - 1];
        }
        let frac = x - k as f64;
        table[k] * (1.0 - frac) + table[k + 1] * frac
    }

    /// `C(u, 0)` for `u >= 0`.
    pub fn forward(&self, u: f64) -> Complex64 {
        match self {
            CorrelationKernel::Exponential { tau_c, .. } => c((-2.0 * u.abs() / tau_c).exp(), 0.0),
            CorrelationKernel::Tabulated { forward, dt, .. } => Self::interp(forward, *dt, u.abs()),
        }
    }

    /// `C(0, u)` for `u >= 0`.
    pub fn backward(&self, u: f64) -> Complex64 {
        match self {
            CorrelationKernel::Exponential { tau_c, .. } => c((-2.0 * u.abs() / tau_c).exp(), 0.0),
            CorrelationKernel::Tabulated { backward, dt, .. } => Self::interp(backward, *dt, u.abs()),
        }
    }

    pub fn from_json(j: &KernelJson) -> Result<Self> {
        match j {
            KernelJson::Exponential { g, tau_c } => Self::exponential(*g, *tau_c),
            KernelJson::Tabulated { g, forward, backward, dt } => Self::tabulated(
                *g,
                forward.iter().map(|v| v.value()).collect(),
                backward.iter().map(|v| v.value()).collect(),
                *dt,
            ),
        }
    }
}

/// A real number or an `[re, im]` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarJson {
    Real(f64),
    Complex([f64; 2]),
}

impl ScalarJson {
    pub fn value(&self) -> Complex64 {
        match *self {
            ScalarJson::Real(x) => c(x, 0.0),
            ScalarJson::Complex([re, im]) => c(re, im),
        }
    }
}

fn default_g() -> f64 {
    1.0
}

/// `{type: "exponential", g, tau_c}` or `{type: "tabulated", forward, backward, dt}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelJson {
    Exponential {
        g: f64,
        tau_c: f64,
    },
    Tabulated {
        #[serde(default = "default_g")]
        g: f64,
        forward: Vec<ScalarJson>,
        backward: Vec<ScalarJson>,
        dt: f64,
    },
}

/// System state plus the auxiliary history operator of the exponential kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryState {
    pub rho: DensityOperator,
    pub aux: ComplexMatrix,
    pub time: f64,
}

impl MemoryState {
    pub fn initial(rho0: &DensityOperator) -> Result<Self> {
        let tr = rho0.weight();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidTrace(tr));
        }
        let d = rho0.dim();
        Ok(MemoryState { rho: rho0.clone(), aux: ComplexMatrix::zeros(d, d), time: 0.0 })
    }
}

/// `ρ_± = (ρ ± A)/2`.
pub fn split_conditional(m: &MemoryState) -> Result<(DensityOperator, DensityOperator)> {
    let half = c(0.5, 0.0);
    let plus = (m.rho.matrix() + &m.aux) * half;
    let minus = (m.rho.matrix() - &m.aux) * half;
    Ok((DensityOperator::from_solver(plus)?, DensityOperator::from_solver(minus)?))
}

fn memory_generator(h: &Hermitian, k: &Hermitian, g: f64, tau_c: f64) -> ComplexMatrix {
    let d2 = h.dim() * h.dim();
    let lh = hamiltonian_superop(h.matrix());
    let lk = hamiltonian_superop(k.matrix()) * c(g, 0.0);
    let mut gen = ComplexMatrix::zeros(2 * d2, 2 * d2);
    gen.view_mut((0, 0), (d2, d2)).copy_from(&lh);
    gen.view_mut((0, d2), (d2, d2)).copy_from(&lk);
    gen.view_mut((d2, 0), (d2, d2)).copy_from(&lk);
    gen.view_mut((d2, d2), (d2, d2)).copy_from(&(lh - identity(d2) * c(2.0 / tau_c, 0.0)));
    gen
}

/// Advance a memory state to `t1` under the exponential kernel.
pub fn step_born_exponential(
    state: &MemoryState,
    drive: &Drive,
    k: &Hermitian,
    kernel: &CorrelationKernel,
    t1: f64,
) -> Result<MemoryState> {
    let CorrelationKernel::Exponential { g, tau_c } = *kernel else {
        return Err(Error::InvalidKernel("local memory closure requires the exponential kernel".into()));
    };
    if !(t1 >= state.time) {
        return Err(Error::NonMonotonicTime { t0: state.time, t1 });
    }
    let d = state.rho.dim();
    if drive.dim() != d || k.dim() != d {
        return Err(Error::DimensionMismatch(d, if drive.dim() != d { drive.dim() } else { k.dim() }));
    }
    let d2 = d * d;
    let mut v = nalgebra::DVector::zeros(2 * d2);
    v.rows_mut(0, d2).copy_from(&vectorize(state.rho.matrix()));
    v.rows_mut(d2, d2).copy_from(&vectorize(&state.aux));
    let mut rho = state.rho.matrix().clone();
    let mut aux = state.aux.clone();
    for piece in drive.pieces(state.time, t1) {
        let gen = memory_generator(piece.hamiltonian, k, g, tau_c);
        v = expm(&(gen * c(piece.duration, 0.0)))? * v;
        rho = unvectorize(v.rows(0, d2).as_slice(), d);
        aux = unvectorize(v.rows(d2, d2).as_slice(), d);
        for m in [&mut rho, &mut aux] {
            let drift = symmetrize(m);
            if drift > DRIFT_TOL {
                return Err(Error::HermiticityDrift(drift));
            }
        }
        v.rows_mut(0, d2).copy_from(&vectorize(&rho));
        v.rows_mut(d2, d2).copy_from(&vectorize(&aux));
    }
    Ok(MemoryState { rho: DensityOperator::from_solver(rho)?, aux, time: t1 })
}

/// Integrate the exponential-kernel Born equation from `ρ0` up to `horizon`.
pub fn evolve_born_exponential(
    drive: &Drive,
    k: &Hermitian,
    kernel: &CorrelationKernel,
    rho0: &DensityOperator,
    horizon: f64,
) -> Result<MemoryState> {
    step_born_exponential(&MemoryState::initial(rho0)?, drive, k, kernel, horizon)
}

/// Memory states at each of the non-decreasing `times`.
pub fn evolve_born_sampled(
    drive: &Drive,
    k: &Hermitian,
    kernel: &CorrelationKernel,
    rho0: &DensityOperator,
    times: &[f64],
) -> Result<Vec<MemoryState>> {
    let mut cur = MemoryState::initial(rho0)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        cur = step_born_exponential(&cur, drive, k, kernel, t)?;
        out.push(cur.clone());
    }
    Ok(out)
}

/// Controls for [`evolve_born_general`].
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureOptions {
    /// Stop refining once halving the step changes `ρ(T)` by less than this
    /// trace distance.
    pub tolerance: f64,
    pub initial_steps: usize,
    pub max_steps: usize,
    /// Ignore history older than this lag.
    pub memory_cutoff: Option<f64>,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { tolerance: 1e-6, initial_steps: 64, max_steps: 1 << 15, memory_cutoff: None }
    }
}

/// Result of the history-quadrature solver.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralSolution {
    pub rho: DensityOperator,
    pub steps: usize,
    /// Trace distance between the last two refinement levels.
    pub achieved: f64,
}

/// Direct solve of the memory-kernel equation with unequal forward and
/// backward kernels, in the interaction picture of `H_s(t)`. The step is
/// halved until the final state changes by less than `options.tolerance`.
pub fn evolve_born_general(
    drive: &Drive,
    k: &Hermitian,
    kernel: &CorrelationKernel,
    rho0: &DensityOperator,
    horizon: f64,
    options: &QuadratureOptions,
) -> Result<GeneralSolution> {
    kernel.validate()?;
    let tr = rho0.weight();
    if (tr - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidTrace(tr));
    }
    if drive.dim() != rho0.dim() || k.dim() != rho0.dim() {
        return Err(Error::DimensionMismatch(rho0.dim(), k.dim()));
    }
    if horizon > kernel.support() * (1.0 + 1e-12) {
        return Err(Error::InvalidKernel(format!(
            "kernel defined up to lag {} but horizon is {horizon}",
            kernel.support()
        )));
    }
    if horizon <= 0.0 {
        return Ok(GeneralSolution { rho: rho0.clone(), steps: 0, achieved: 0.0 });
    }
    let mut n = options.initial_steps.max(1);
    let mut prev = history_quadrature(drive, k, kernel, rho0, horizon, n, options.memory_cutoff)?;
    loop {
        let next_n = 2 * n;
        if next_n > options.max_steps {
            let achieved = f64::INFINITY;
            return Err(Error::QuadratureNonConvergence { achieved, steps: n });
        }
        let next = history_quadrature(drive, k, kernel, rho0, horizon, next_n, options.memory_cutoff)?;
        let change = crate::operators::matrix_trace_distance(&prev, &next)?;
        if change < options.tolerance {
            return Ok(GeneralSolution { rho: DensityOperator::from_solver(next)?, steps: next_n, achieved: change });
        }
        if next_n * 2 > options.max_steps {
            return Err(Error::QuadratureNonConvergence { achieved: change, steps: next_n });
        }
        prev = next;
        n = next_n;
    }
}

/// One solve on a uniform grid of `n` steps. Trapezoidal rule for both the
/// history integral and the time stepping, with a fixed-point corrector for
/// the implicit end point.
fn history_quadrature(
    drive: &Drive,
    k: &Hermitian,
    kernel: &CorrelationKernel,
    rho0: &DensityOperator,
    horizon: f64,
    n: usize,
    cutoff: Option<f64>,
) -> Result<ComplexMatrix> {
    let d = rho0.dim();
    let d2 = d * d;
    let h = horizon / n as f64;
    let g2 = kernel.g() * kernel.g();
    let cf: Vec<Complex64> = (0..=n).map(|l| kernel.forward(l as f64 * h)).collect();
    let cb: Vec<Complex64> = (0..=n).map(|l| kernel.backward(l as f64 * h)).collect();
    let max_lag = cutoff.map(|cut| (cut / h).floor() as usize).unwrap_or(usize::MAX);

    // interaction-picture coupling on the grid
    let mut u = identity(d);
    let mut k_tilde = Vec::with_capacity(n + 1);
    k_tilde.push(k.matrix().clone());
    for step in 0..n {
        let (t0, t1) = (step as f64 * h, (step + 1) as f64 * h);
        for piece in drive.pieces(t0, t1) {
            u = unitary(piece.hamiltonian, piece.duration)? * u;
        }
        k_tilde.push(u.adjoint() * k.matrix() * &u);
    }

    // history of K̃ρ̃ and ρ̃K̃, flattened column-major
    let mut p_hist: Vec<Complex64> = Vec::with_capacity((n + 1) * d2);
    let mut q_hist: Vec<Complex64> = Vec::with_capacity((n + 1) * d2);
    let mut rho = rho0.matrix().clone();
    p_hist.extend_from_slice((&k_tilde[0] * &rho).as_slice());
    q_hist.extend_from_slice((&rho * &k_tilde[0]).as_slice());
    let mut f_prev = ComplexMatrix::zeros(d, d);

    let mut x_hist = vec![c(0.0, 0.0); d2];
    for step in 0..n {
        let next = step + 1;
        // history part of X(t_next): trapezoid weights, excluding m = next
        x_hist.iter_mut().for_each(|x| *x = c(0.0, 0.0));
        let lo = next.saturating_sub(max_lag);
        for m in lo..next {
            let w = if m == 0 || m == lo { 0.5 * h } else { h };
            let lag = next - m;
            let (a, b) = (cf[lag] * w, cb[lag] * w);
            let p = &p_hist[m * d2..(m + 1) * d2];
            let q = &q_hist[m * d2..(m + 1) * d2];
            for e in 0..d2 {
                x_hist[e] += a * p[e] - b * q[e];
            }
        }
        let x_hist_m = unvectorize(&x_hist, d);
        let kt = &k_tilde[next];
        let rhs = |r: &ComplexMatrix| -> ComplexMatrix {
            let x = &x_hist_m + (kt * r * cf[0] - r * kt * cb[0]) * c(0.5 * h, 0.0);
            (kt * &x - &x * kt) * c(-g2, 0.0)
        };
        let mut guess = &rho + &f_prev * c(h, 0.0);
        let mut f_next = rhs(&guess);
        for _ in 0..8 {
            let updated = &rho + (&f_prev + &f_next) * c(0.5 * h, 0.0);
            let delta = (&updated - &guess).norm();
            guess = updated;
            f_next = rhs(&guess);
            if delta < 1e-15 {
                break;
            }
        }
        rho = &rho + (&f_prev + &f_next) * c(0.5 * h, 0.0);
        let drift = symmetrize(&mut rho);
        if drift > DRIFT_TOL {
            return Err(Error::HermiticityDrift(drift));
        }
        f_prev = rhs(&rho);
        p_hist.extend_from_slice((kt * &rho).as_slice());
        q_hist.extend_from_slice((&rho * kt).as_slice());
    }
    // back to the Schrödinger picture
    Ok(&u * rho * u.adjoint())
}
