//! Classical continuous-time Markov noise.
//!
//! The chain has `N` states with rate matrix `γ`, where `γ[k][j]` (k ≠ j) is
//! the rate of jumping from state `j` to state `k` and every column sums to
//! zero, so `∂t P = γ P` conserves probability. Each noise state `k` adds a
//! Hermitian offset to the system Hamiltonian: `H_k(t) = H_s(t) + offset_k`.
//!
//! Random telegraph noise uses a flip rate of `1/τc` in each direction, so
//! the ±1 signal has autocorrelation `exp(-2|t|/τc)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::drive::Drive;
use crate::error::{Error, Result};
use crate::operators::{pauli, Hermitian, MatrixJson, Pauli};
use crate::pulse::ControlPulse;

/// Strength and correlation time of a single bistable fluctuator.
#[derive(Clone, Debug, PartialEq)]
pub struct RtnSpec {
    pub delta: f64,
    pub tau_c: f64,
    /// Operator multiplied by `±Δ`; `σz/2` unless overridden.
    pub coupling_axis: Hermitian,
}

impl RtnSpec {
    pub fn new(delta: f64, tau_c: f64) -> Result<Self> {
        Self::with_axis(delta, tau_c, pauli(Pauli::Z).scale(0.5))
    }

    pub fn with_axis(delta: f64, tau_c: f64, coupling_axis: Hermitian) -> Result<Self> {
        if !(tau_c > 0.0) || !tau_c.is_finite() {
            return Err(Error::InvalidParameter(format!("tau_c must be positive, got {tau_c}")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!("delta must be non-negative, got {delta}")));
        }
        Ok(RtnSpec { delta, tau_c, coupling_axis })
    }

    pub fn flip_rate(&self) -> f64 {
        1.0 / self.tau_c
    }

    /// The two Hamiltonian offsets `±Δ · axis`, for the `+` and `−` states.
    pub fn offsets(&self) -> [Hermitian; 2] {
        [self.coupling_axis.scale(self.delta), self.coupling_axis.scale(-self.delta)]
    }
}

/// Markov noise acting on a driven system.
#[derive(Clone, Debug, PartialEq)]
pub struct MarkovNoiseModel {
    rates: DMatrix<f64>,
    offsets: Vec<Hermitian>,
    drive: Drive,
}

impl MarkovNoiseModel {
    /// Validates the rate matrix and rebuilds its diagonal as minus the
    /// column sums of the off-diagonal rates.
    pub fn new(rates: DMatrix<f64>, offsets: Vec<Hermitian>, drive: Drive) -> Result<Self> {
        let n = rates.nrows();
        if n == 0 || !rates.is_square() {
            return Err(Error::InvalidRates(format!(
                "rate matrix must be square and non-empty, got {:?}",
                rates.shape()
            )));
        }
        if offsets.len() != n {
            return Err(Error::InvalidRates(format!("{} noise states but {} Hamiltonian offsets", n, offsets.len())));
        }
        for h in &offsets {
            if h.dim() != drive.dim() {
                return Err(Error::DimensionMismatch(drive.dim(), h.dim()));
            }
        }
        let scale = rates.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
        let mut fixed = rates.clone();
        for j in 0..n {
            let mut off = 0.0;
            for k in 0..n {
                let r = rates[(k, j)];
                if !r.is_finite() {
                    return Err(Error::InvalidRates(format!("rate ({k},{j}) is not finite")));
                }
                if k != j {
                    if r < 0.0 {
                        return Err(Error::InvalidRates(format!("negative rate {r} at ({k},{j})")));
                    }
                    off += r;
                }
            }
            let colsum = off + rates[(j, j)];
            if colsum.abs() > 1e-12 * scale {
                return Err(Error::InvalidRates(format!("column {j} sums to {colsum}")));
            }
            fixed[(j, j)] = -off;
        }
        Ok(MarkovNoiseModel { rates: fixed, offsets, drive })
    }

    /// Build from off-diagonal rates only; the diagonal of `rates` is ignored.
    pub fn from_transition_rates(rates: DMatrix<f64>, offsets: Vec<Hermitian>, drive: Drive) -> Result<Self> {
        let mut r = rates;
        let n = r.nrows();
        for j in 0..n.min(r.ncols()) {
            let off: f64 = (0..n).filter(|&k| k != j).map(|k| r[(k, j)]).sum();
            r[(j, j)] = -off;
        }
        Self::new(r, offsets, drive)
    }

    pub fn n_states(&self) -> usize {
        self.rates.nrows()
    }

    pub fn dim(&self) -> usize {
        self.drive.dim()
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn offsets(&self) -> &[Hermitian] {
        &self.offsets
    }

    pub fn drive(&self) -> &Drive {
        &self.drive
    }

    /// Same noise with a different system drive.
    pub fn with_drive(&self, drive: Drive) -> Result<Self> {
        Self::new(self.rates.clone(), self.offsets.clone(), drive)
    }

    /// `H_k(t)`.
    pub fn hamiltonian(&self, k: usize, t: f64) -> Hermitian {
        self.drive.at(t).add(&self.offsets[k]).expect("dimensions validated")
    }

    /// Fastest escape rate `max_k |γ_kk|`.
    pub fn max_rate(&self) -> f64 {
        (0..self.n_states()).map(|k| self.rates[(k, k)].abs()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> NoiseModelJson {
        NoiseModelJson {
            rates: (0..self.n_states()).map(|k| (0..self.n_states()).map(|j| self.rates[(k, j)]).collect()).collect(),
            states: self.offsets.iter().map(|h| StateJson { delta_h: MatrixJson::from(h.matrix()) }).collect(),
        }
    }

    pub fn from_json(j: &NoiseModelJson, drive: Drive) -> Result<Self> {
        let n = j.rates.len();
        if j.rates.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidRates("rate matrix rows have unequal lengths".into()));
        }
        let rates = DMatrix::from_fn(n, n, |k, l| j.rates[k][l]);
        let offsets = j.states.iter().map(|s| Hermitian::try_from(&s.delta_h)).collect::<Result<Vec<_>>>()?;
        Self::new(rates, offsets, drive)
    }
}

/// `{rates: [[...]], states: [{delta_h: matrix}, ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModelJson {
    pub rates: Vec<Vec<f64>>,
    pub states: Vec<StateJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateJson {
    pub delta_h: MatrixJson,
}

/// Symmetric telegraph rate matrix with flip rate `1/τc`.
pub fn rtn_rates(tau_c: f64) -> DMatrix<f64> {
    let r = 1.0 / tau_c;
    DMatrix::from_row_slice(2, 2, &[-r, r, r, -r])
}

/// RTN on a qubit driven by `a(t) σx / 2`: `H_± = a(t) σx/2 ± Δ·axis`.
pub fn rtn_model(spec: &RtnSpec, pulse: &ControlPulse) -> MarkovNoiseModel {
    let [plus, minus] = spec.offsets();
    MarkovNoiseModel { rates: rtn_rates(spec.tau_c), offsets: vec![plus, minus], drive: Drive::qubit_x(pulse) }
}

/// Unique stationary distribution of a rate matrix.
pub fn stationary_of_rates(rates: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = rates.nrows();
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // One balance row is redundant; replace it with the normalization.
    let mut a = rates.clone();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let scale = rates.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
    let lu = a.lu();
    let det = lu.determinant();
    if det.abs() <= 1e-13 * scale.powi(n as i32 - 1) {
        return Err(Error::DegenerateChain);
    }
    let p = lu.solve(&b).ok_or(Error::DegenerateChain)?;
    if p.iter().any(|&x| x < -1e-12 || !x.is_finite()) {
        return Err(Error::DegenerateChain);
    }
    Ok(p.iter().map(|&x| x.max(0.0)).collect())
}

pub fn stationary_distribution(model: &MarkovNoiseModel) -> Result<Vec<f64>> {
    stationary_of_rates(model.rates())
}

/// One realization of the noise process on `[0, horizon]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseTrajectory {
    pub initial_state: usize,
    /// Strictly increasing jump times in `(0, horizon)`.
    pub switch_times: Vec<f64>,
    /// State entered at each jump.
    pub states: Vec<usize>,
    pub horizon: f64,
}

impl NoiseTrajectory {
    pub fn state_at(&self, t: f64) -> usize {
        let idx = self.switch_times.partition_point(|&s| s <= t);
        if idx == 0 {
            self.initial_state
        } else {
            self.states[idx - 1]
        }
    }
}

/// Independent stream for trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn pick_weighted<R: Rng + ?Sized>(
    weights: impl Iterator<Item = (usize, f64)> + Clone,
    total: f64,
    rng: &mut R,
) -> usize {
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, w) in weights {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = k;
        if u < acc {
            return k;
        }
    }
    last
}

/// Gillespie sampling: the initial state is drawn from `initial`, waiting
/// times are exponential with rate `|γ_kk|`, and the next state is chosen in
/// proportion to `γ_jk`.
pub fn sample_trajectory_from<R: Rng + ?Sized>(
    rates: &DMatrix<f64>,
    initial: &[f64],
    horizon: f64,
    rng: &mut R,
) -> NoiseTrajectory {
    let n = rates.nrows();
    let mut state = pick_weighted(initial.iter().cloned().enumerate(), initial.iter().sum(), rng);
    let initial_state = state;
    let mut switch_times = Vec::new();
    let mut states = Vec::new();
    let mut t = 0.0;
    loop {
        let escape = -rates[(state, state)];
        if escape <= 0.0 {
            break;
        }
        let u: f64 = 1.0 - rng.random::<f64>();
        t += -u.ln() / escape;
        if t >= horizon {
            break;
        }
        let next = pick_weighted((0..n).filter(|&j| j != state).map(|j| (j, rates[(j, state)])), escape, rng);
        state = next;
        switch_times.push(t);
        states.push(state);
    }
    NoiseTrajectory { initial_state, switch_times, states, horizon }
}

pub fn sample_trajectory<R: Rng + ?Sized>(
    model: &MarkovNoiseModel,
    horizon: f64,
    rng: &mut R,
) -> Result<NoiseTrajectory> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    let p = stationary_distribution(model)?;
    Ok(sample_trajectory_from(model.rates(), &p, horizon, rng))
}
