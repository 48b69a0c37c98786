//! Process maps and the average gate fidelity of qubit gates.
//!
//! A qubit map is stored as its Pauli transfer matrix
//! `R_ij = Tr(σ_i E(σ_j)) / 2` with `σ_0 = I`, so the first row of a
//! trace-preserving map is `(1, 0, 0, 0)`. For a target `U`,
//!
//! ```text
//! Φ = R_00 / 2 + (1/6) Σ_{i,j ∈ x,y,z} R^U_ij R_ij
//! ```
//!
//! which is the uniform average of `Tr(U ρ U† E(ρ))` over pure states.

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;

use crate::born::{evolve_born_exponential, CorrelationKernel};
use crate::defect::{evolve_defect_blocks, DefectModel};
use crate::drive::Drive;
use crate::ensemble::{evolve_average, Backend};
use crate::error::{Error, Result};
use crate::montecarlo::{mc_process_map, McConfig};
use crate::noise::{rtn_model, RtnSpec};
use crate::operators::{c, identity, pauli, trace, ComplexMatrix, DensityOperator, Pauli};
use crate::pulse::ControlPulse;

/// Real 4×4 Pauli transfer matrix of a qubit map.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessMap {
    matrix: Matrix4<f64>,
}

/// `Tr(σ_i A)` for `i = I, x, y, z` (real parts).
pub fn pauli_components(a: &ComplexMatrix) -> Vector4<f64> {
    Vector4::from_iterator(Pauli::ALL.iter().map(|&p| trace(&(pauli(p).matrix() * a)).re))
}

/// Transfer matrix of `ρ ↦ U ρ U†`.
pub fn pauli_transfer_of_unitary(u: &ComplexMatrix) -> Matrix4<f64> {
    let mut r = Matrix4::zeros();
    for (j, &pj) in Pauli::ALL.iter().enumerate() {
        let img = u * pauli(pj).matrix() * u.adjoint();
        r.set_column(j, &(pauli_components(&img) * 0.5));
    }
    r
}

/// `(d + |Tr V†U|²) / (d(d+1))`, the average fidelity of unitary `U` to `V`.
pub fn unitary_fidelity(u: &ComplexMatrix, target: &ComplexMatrix) -> f64 {
    let d = u.nrows() as f64;
    let overlap = (target.adjoint() * u).trace().norm_sqr();
    (d + overlap) / (d * (d + 1.0))
}

/// The NOT gate `σx`.
pub fn not_target() -> ComplexMatrix {
    pauli(Pauli::X).into_matrix()
}

impl ProcessMap {
    pub fn identity() -> Self {
        ProcessMap { matrix: Matrix4::identity() }
    }

    pub fn from_matrix(matrix: Matrix4<f64>) -> Self {
        ProcessMap { matrix }
    }

    pub fn from_unitary(u: &ComplexMatrix) -> Result<Self> {
        check_unitary(u)?;
        Ok(ProcessMap { matrix: pauli_transfer_of_unitary(u) })
    }

    /// Build the map from any linear evolution by evolving `|0⟩, |1⟩, |+x⟩, |+y⟩`.
    pub fn from_evolution<F>(mut evolve: F) -> Result<Self>
    where
        F: FnMut(&DensityOperator) -> Result<DensityOperator>,
    {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let inputs = [
            DensityOperator::basis(2, 0),
            DensityOperator::basis(2, 1),
            DensityOperator::pure(&[c(s, 0.0), c(s, 0.0)])?,
            DensityOperator::pure(&[c(s, 0.0), c(0.0, s)])?,
        ];
        let mut out = Vec::with_capacity(4);
        for rho in &inputs {
            let e = evolve(rho)?;
            if e.dim() != 2 {
                return Err(Error::NotQubit(e.dim()));
            }
            out.push(e.into_matrix());
        }
        let e_id = &out[0] + &out[1];
        let images = [e_id.clone(), &out[2] * c(2.0, 0.0) - &e_id, &out[3] * c(2.0, 0.0) - &e_id, &out[0] - &out[1]];
        let mut matrix = Matrix4::zeros();
        for (j, img) in images.iter().enumerate() {
            matrix.set_column(j, &(pauli_components(img) * 0.5));
        }
        Ok(ProcessMap { matrix })
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    /// Deviation of the first row from `(1, 0, 0, 0)`.
    pub fn trace_row_deviation(&self) -> f64 {
        let row = self.matrix.row(0);
        (row[0] - 1.0).abs().max(row[1].abs()).max(row[2].abs()).max(row[3].abs())
    }

    /// Apply the map to any 2×2 operator.
    pub fn apply(&self, a: &ComplexMatrix) -> Result<ComplexMatrix> {
        if a.nrows() != 2 || a.ncols() != 2 {
            return Err(Error::NotQubit(a.nrows()));
        }
        // Pauli components may be complex for non-Hermitian input
        let comps: Vec<_> = Pauli::ALL.iter().map(|&p| trace(&(pauli(p).matrix() * a))).collect();
        let mut out = ComplexMatrix::zeros(2, 2);
        for (i, &pi) in Pauli::ALL.iter().enumerate() {
            let mut coef = c(0.0, 0.0);
            for (j, z) in comps.iter().enumerate() {
                coef += z * self.matrix[(i, j)];
            }
            out += pauli(pi).matrix() * (coef * 0.5);
        }
        Ok(out)
    }

    pub fn apply_state(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        DensityOperator::from_solver(self.apply(rho.matrix())?)
    }

    /// `self ∘ first`.
    pub fn compose(&self, first: &ProcessMap) -> ProcessMap {
        ProcessMap { matrix: self.matrix * first.matrix }
    }
}

fn check_unitary(u: &ComplexMatrix) -> Result<()> {
    if u.nrows() != 2 || u.ncols() != 2 {
        return Err(Error::NotQubit(u.nrows()));
    }
    let dev = (u.adjoint() * u - identity(2)).norm();
    if dev > 1e-9 {
        return Err(Error::NotUnitary(dev));
    }
    Ok(())
}

/// Uniform pure-state average of `Tr(U ρ U† E(ρ))`.
pub fn average_gate_fidelity(map: &ProcessMap, target: &ComplexMatrix) -> Result<f64> {
    check_unitary(target)?;
    let ru = pauli_transfer_of_unitary(target);
    let r = map.matrix();
    let mut sum = 0.0;
    for i in 1..4 {
        for j in 1..4 {
            sum += ru[(i, j)] * r[(i, j)];
        }
    }
    Ok(r[(0, 0)] / 2.0 + sum / 6.0)
}

/// Which formulation evolves the noisy gate.
#[derive(Clone, Debug, PartialEq)]
pub enum Solver {
    /// Conditional density operators of the telegraph process.
    Ensemble(Backend),
    /// Exponential-kernel memory equation with `g = Δ`, `K = coupling axis`.
    Born,
    /// Diagonal defect blocks with `Γ1 = Γ2 = 1/τc` and `K_s = Δ · axis`.
    Defect,
    /// Mean transfer matrix over sampled trajectories.
    MonteCarlo { n_traj: usize, seed: u64 },
}

impl Solver {
    pub fn name(&self) -> &'static str {
        match self {
            Solver::Ensemble(_) => "ensemble",
            Solver::Born => "born",
            Solver::Defect => "defect",
            Solver::MonteCarlo { .. } => "mc",
        }
    }
}

/// Transfer matrix of `pulse` under telegraph noise `spec`.
pub fn process_map(solver: &Solver, pulse: &ControlPulse, spec: &RtnSpec) -> Result<ProcessMap> {
    let horizon = pulse.duration();
    let drive = Drive::qubit_x(pulse);
    match solver {
        Solver::Ensemble(backend) => {
            let model = rtn_model(spec, pulse);
            ProcessMap::from_evolution(|rho| evolve_average(rho, &model, horizon, *backend))
        }
        Solver::Born => {
            let kernel = CorrelationKernel::exponential(spec.delta, spec.tau_c)?;
            ProcessMap::from_evolution(|rho| {
                Ok(evolve_born_exponential(&drive, &spec.coupling_axis, &kernel, rho, horizon)?.rho)
            })
        }
        Solver::Defect => {
            let rate = spec.flip_rate();
            let model = DefectModel::new(drive.clone(), spec.coupling_axis.scale(spec.delta), 0.0, rate, rate)?;
            ProcessMap::from_evolution(|rho| evolve_defect_blocks(&model, rho, horizon)?.system())
        }
        Solver::MonteCarlo { n_traj, seed } => {
            let model = rtn_model(spec, pulse);
            Ok(mc_process_map(&model, horizon, &McConfig::new(*n_traj, *seed))?.map)
        }
    }
}

/// NOT-gate fidelity of `pulse` under `spec`.
pub fn not_fidelity(solver: &Solver, pulse: &ControlPulse, spec: &RtnSpec) -> Result<f64> {
    average_gate_fidelity(&process_map(solver, pulse, spec)?, &not_target())
}

/// One cell of a fidelity sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub tau_c: f64,
    pub pulse_name: String,
    pub delta: f64,
    pub fidelity: f64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "tau_c,pulse_name,delta,fidelity";

    pub fn to_csv(&self) -> String {
        format!("{},{},{},{}", self.tau_c, self.pulse_name, self.delta, self.fidelity)
    }
}

/// NOT-gate fidelity for every `(τc, pulse)` pair, ordered by `τc` then pulse.
pub fn fidelity_sweep(
    pulses: &[(String, ControlPulse)],
    delta: f64,
    taus: &[f64],
    solver: &Solver,
) -> Result<Vec<SweepRow>> {
    let cells: Vec<(f64, &(String, ControlPulse))> =
        taus.iter().flat_map(|&t| pulses.iter().map(move |p| (t, p))).collect();
    cells
        .par_iter()
        .map(|&(tau_c, (name, pulse))| {
            let spec = RtnSpec::new(delta, tau_c)?;
            Ok(SweepRow { tau_c, pulse_name: name.clone(), delta, fidelity: not_fidelity(solver, pulse, &spec)? })
        })
        .collect()
}
