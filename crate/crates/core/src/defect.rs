//! A two-level defect coupled to the system and to a fermionic bath.
//!
//! The joint space is ordered defect ⊗ system. With system dimension `d`,
//! joint index `a * d + i` holds defect level `a` and system level `i`, where
//! defect level 0 is `|+⟩` (occupied) and level 1 is `|-⟩`. The joint
//! Hamiltonian is
//!
//! ```text
//! H = I ⊗ H_s + (ε/2) σz ⊗ I + σz ⊗ K_s
//! ```
//!
//! and the bath acts through `Γ1 D[σ⁻ ⊗ I] + Γ2 D[σ⁺ ⊗ I]` with
//! `σ⁻ = |-⟩⟨+|`. Writing the joint state in 2×2 blocks of `d×d` matrices,
//! the diagonal blocks obey a closed two-state Markov equation with
//! `H_± = H_s ± K_s` and rates `γ = [[-Γ1, Γ2], [Γ1, -Γ2]]`; the
//! off-diagonal blocks evolve on their own.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::drive::Drive;
use crate::ensemble::{evolve_ensemble_with, init_ensemble_with, Backend};
use crate::error::{Error, Result};
use crate::noise::MarkovNoiseModel;
use crate::operators::{
    c, dissipator_superop, expm, hamiltonian_superop, identity, kron, sandwich_superop, symmetrize, unvectorize,
    vectorize, ComplexMatrix, DensityOperator, Hermitian, MatrixJson, DRIFT_TOL,
};

/// Defect level operators in the `(|+⟩, |-⟩)` basis.
pub fn defect_sigma_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)])
}

/// `σ⁻ = |-⟩⟨+|`.
pub fn defect_lower() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)])
}

/// Rates with `Γ1/Γ2 = exp(ε/kT)` and `Γ1 + Γ2 = gamma_sum`.
pub fn detailed_balance_rates(epsilon: f64, kt: f64, gamma_sum: f64) -> Result<(f64, f64)> {
    if !(kt > 0.0) || !(gamma_sum > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "detailed balance needs kT > 0 and gamma_sum > 0 (got kT={kt}, gamma_sum={gamma_sum})"
        )));
    }
    // logistic form stays finite for large |ε/kT|
    let x = epsilon / kt;
    let frac_out = if x >= 0.0 { 1.0 / (1.0 + (-x).exp()) } else { x.exp() / (1.0 + x.exp()) };
    Ok((gamma_sum * frac_out, gamma_sum * (1.0 - frac_out)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefectModel {
    /// System Hamiltonian, possibly carrying a control pulse.
    pub h_s: Drive,
    pub k_s: Hermitian,
    pub epsilon: f64,
    /// Tunneling out, `|+⟩ → |-⟩`.
    pub gamma1: f64,
    /// Tunneling in, `|-⟩ → |+⟩`.
    pub gamma2: f64,
}

impl DefectModel {
    pub fn new(h_s: Drive, k_s: Hermitian, epsilon: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        if h_s.dim() != k_s.dim() {
            return Err(Error::DimensionMismatch(h_s.dim(), k_s.dim()));
        }
        if !(gamma1 >= 0.0 && gamma2 >= 0.0 && gamma1.is_finite() && gamma2.is_finite()) {
            return Err(Error::InvalidRates(format!("defect rates must be non-negative, got {gamma1}, {gamma2}")));
        }
        if !epsilon.is_finite() {
            return Err(Error::InvalidParameter("epsilon is not finite".into()));
        }
        Ok(DefectModel { h_s, k_s, epsilon, gamma1, gamma2 })
    }

    /// System dimension `d`.
    pub fn dim(&self) -> usize {
        self.k_s.dim()
    }

    /// Stationary `(p+, p-)` of the defect alone.
    pub fn stationary_populations(&self) -> Result<(f64, f64)> {
        let s = self.gamma1 + self.gamma2;
        if s <= 0.0 {
            return Err(Error::AmbiguousInitialSplit);
        }
        Ok((self.gamma2 / s, self.gamma1 / s))
    }

    /// Two-state Markov model for the diagonal blocks.
    pub fn to_noise_model(&self) -> Result<MarkovNoiseModel> {
        let rates = DMatrix::from_row_slice(2, 2, &[-self.gamma1, self.gamma2, self.gamma1, -self.gamma2]);
        MarkovNoiseModel::new(rates, vec![self.k_s.clone(), self.k_s.scale(-1.0)], self.h_s.clone())
    }

    /// Joint Hamiltonian for a given system Hamiltonian.
    pub fn joint_hamiltonian(&self, h_s: &Hermitian) -> ComplexMatrix {
        let d = self.dim();
        let sz = defect_sigma_z();
        kron(&identity(2), h_s.matrix())
            + kron(&sz, &identity(d)) * c(self.epsilon / 2.0, 0.0)
            + kron(&sz, self.k_s.matrix())
    }

    /// Vectorized Lindblad generator on the `2d × 2d` joint space.
    pub fn joint_generator(&self, h_s: &Hermitian) -> ComplexMatrix {
        let d = self.dim();
        let lower = kron(&defect_lower(), &identity(d));
        let raise = lower.adjoint();
        hamiltonian_superop(&self.joint_hamiltonian(h_s))
            + dissipator_superop(&lower) * c(self.gamma1, 0.0)
            + dissipator_superop(&raise) * c(self.gamma2, 0.0)
    }

    pub fn from_json(j: &DefectModelJson, drive: Option<Drive>) -> Result<Self> {
        let k_s = Hermitian::try_from(&j.k_s)?;
        let h_s = match (&j.h_s, drive) {
            (_, Some(d)) => d,
            (Some(m), None) => Drive::constant(Hermitian::try_from(m)?),
            (None, None) => Drive::constant(Hermitian::zeros(k_s.dim())),
        };
        let (g1, g2) = match (j.gamma1, j.gamma2, j.kt, j.gamma_sum) {
            (Some(g1), Some(g2), None, None) => (g1, g2),
            (None, None, Some(kt), Some(sum)) => detailed_balance_rates(j.epsilon, kt, sum)?,
            _ => {
                return Err(Error::InvalidParameter(
                    "defect model needs either gamma1 and gamma2, or kT and gamma_sum".into(),
                ))
            }
        };
        DefectModel::new(h_s, k_s, j.epsilon, g1, g2)
    }
}

/// `{h_s, k_s, epsilon, gamma1, gamma2}` or `{h_s, k_s, epsilon, kT, gamma_sum}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectModelJson {
    #[serde(default)]
    pub h_s: Option<MatrixJson>,
    pub k_s: MatrixJson,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub gamma1: Option<f64>,
    #[serde(default)]
    pub gamma2: Option<f64>,
    #[serde(default, rename = "kT")]
    pub kt: Option<f64>,
    #[serde(default)]
    pub gamma_sum: Option<f64>,
}

/// Diagonal blocks, plus off-diagonal blocks when tracked.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockState {
    pub pp: DensityOperator,
    pub mm: DensityOperator,
    pub pm: Option<ComplexMatrix>,
    pub mp: Option<ComplexMatrix>,
}

impl BlockState {
    /// `ρ_s = ρ++ + ρ--`.
    pub fn system(&self) -> Result<DensityOperator> {
        DensityOperator::from_solver(self.pp.matrix() + self.mm.matrix())
    }
}

/// `ρ_d ⊗ ρ0` with the defect in its stationary mixture.
pub fn stationary_joint_state(model: &DefectModel, rho0: &DensityOperator) -> Result<DensityOperator> {
    let (pp, pm) = model.stationary_populations()?;
    product_state(pp, pm, rho0)
}

fn product_state(p_plus: f64, p_minus: f64, rho0: &DensityOperator) -> Result<DensityOperator> {
    let rd = ComplexMatrix::from_row_slice(2, 2, &[c(p_plus, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(p_minus, 0.0)]);
    DensityOperator::new(kron(&rd, rho0.matrix()))
}

/// Split a joint state into its four `d×d` blocks.
pub fn blocks_of(rho_ds: &DensityOperator, d: usize) -> Result<BlockState> {
    if rho_ds.dim() != 2 * d {
        return Err(Error::DimensionMismatch(2 * d, rho_ds.dim()));
    }
    let m = rho_ds.matrix();
    Ok(BlockState {
        pp: DensityOperator::from_solver(m.view((0, 0), (d, d)).into_owned())?,
        mm: DensityOperator::from_solver(m.view((d, d), (d, d)).into_owned())?,
        pm: Some(m.view((0, d), (d, d)).into_owned()),
        mp: Some(m.view((d, 0), (d, d)).into_owned()),
    })
}

/// `Tr_d ρ_ds`.
pub fn partial_trace_defect(rho_ds: &DensityOperator, d: usize) -> Result<DensityOperator> {
    blocks_of(rho_ds, d)?.system()
}

/// Integrate the joint Lindblad equation exactly over each constant piece.
pub fn evolve_defect_full(model: &DefectModel, rho_ds0: &DensityOperator, horizon: f64) -> Result<DensityOperator> {
    let d = model.dim();
    if rho_ds0.dim() != 2 * d {
        return Err(Error::DimensionMismatch(2 * d, rho_ds0.dim()));
    }
    if horizon < 0.0 {
        return Err(Error::NonMonotonicTime { t0: 0.0, t1: horizon });
    }
    let mut rho = rho_ds0.matrix().clone();
    for piece in model.h_s.pieces(0.0, horizon) {
        let gen = model.joint_generator(piece.hamiltonian) * c(piece.duration, 0.0);
        rho = unvectorize((expm(&gen)? * vectorize(&rho)).as_slice(), 2 * d);
        let drift = symmetrize(&mut rho);
        if drift > DRIFT_TOL {
            return Err(Error::HermiticityDrift(drift));
        }
    }
    DensityOperator::from_solver(rho)
}

/// Propagate only `ρ++` and `ρ--`, starting from the stationary split of `ρ0`.
pub fn evolve_defect_blocks(model: &DefectModel, rho0: &DensityOperator, horizon: f64) -> Result<BlockState> {
    let (p, m) = model.stationary_populations()?;
    evolve_defect_blocks_from(model, rho0, p, m, horizon)
}

/// As [`evolve_defect_blocks`] with an explicit initial defect split.
pub fn evolve_defect_blocks_from(
    model: &DefectModel,
    rho0: &DensityOperator,
    p_plus: f64,
    p_minus: f64,
    horizon: f64,
) -> Result<BlockState> {
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch(model.dim(), rho0.dim()));
    }
    let noise = model.to_noise_model()?;
    let e0 = init_ensemble_with(rho0, &[p_plus, p_minus])?;
    let e = evolve_ensemble_with(&e0, &noise, horizon, Backend::Exact)?;
    Ok(BlockState { pp: e.parts()[0].clone(), mm: e.parts()[1].clone(), pm: None, mp: None })
}

/// Closed equation for `ρ+-`:
/// `∂t ρ+- = -i[H_s, ρ+-] - iε ρ+- - i{K_s, ρ+-} - ((Γ1+Γ2)/2) ρ+-`.
pub fn offdiag_block_dynamics(model: &DefectModel, pm0: &ComplexMatrix, horizon: f64) -> Result<ComplexMatrix> {
    let d = model.dim();
    if pm0.nrows() != d || pm0.ncols() != d {
        return Err(Error::DimensionMismatch(d, pm0.nrows()));
    }
    let k = model.k_s.matrix();
    let anti = (sandwich_superop(k, &identity(d)) + sandwich_superop(&identity(d), k)) * c(0.0, -1.0);
    let local = identity(d * d) * c(-(model.gamma1 + model.gamma2) / 2.0, -model.epsilon);
    let mut v = vectorize(pm0);
    for piece in model.h_s.pieces(0.0, horizon) {
        let gen = hamiltonian_superop(piece.hamiltonian.matrix()) + &anti + &local;
        v = expm(&(gen * c(piece.duration, 0.0)))? * v;
    }
    Ok(unvectorize(v.as_slice(), d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{pauli, Pauli};

    #[test]
    fn detailed_balance_examples() {
        let (a, b) = detailed_balance_rates(0.0, 1.0, 4.0).unwrap();
        assert_eq!((a, b), (2.0, 2.0));
        let (a, b) = detailed_balance_rates(2f64.ln(), 1.0, 3.0).unwrap();
        assert!((a - 2.0).abs() < 1e-14 && (b - 1.0).abs() < 1e-14);
        let (a, b) = detailed_balance_rates(1.0, 1e9, 2.0).unwrap();
        assert!((a / b - 1.0).abs() < 1e-8);
        let (a, b) = detailed_balance_rates(800.0, 1.0, 2.0).unwrap();
        assert!(a == 2.0 && b == 0.0);
        assert!(detailed_balance_rates(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn ambiguous_split_is_an_error() {
        let m = DefectModel::new(Drive::constant(Hermitian::zeros(2)), pauli(Pauli::Z), 0.0, 0.0, 0.0).unwrap();
        assert_eq!(evolve_defect_blocks(&m, &DensityOperator::basis(2, 0), 1.0), Err(Error::AmbiguousInitialSplit));
        assert!(evolve_defect_blocks_from(&m, &DensityOperator::basis(2, 0), 1.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn rejects_negative_rates() {
        assert!(DefectModel::new(Drive::constant(Hermitian::zeros(2)), pauli(Pauli::Z), 0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn json_forms() {
        let j: DefectModelJson = serde_json::from_str(
            r#"{"k_s":[[[0.5,0],[0,0]],[[0,0],[-0.5,0]]],"epsilon":0.6931471805599453,"kT":1.0,"gamma_sum":3.0}"#,
        )
        .unwrap();
        let m = DefectModel::from_json(&j, None).unwrap();
        assert!((m.gamma1 - 2.0).abs() < 1e-12);
        let j: DefectModelJson =
            serde_json::from_str(r#"{"k_s":[[[1,0]]],"gamma1":1.0,"gamma2":0.5,"kT":1.0}"#).unwrap();
        assert!(DefectModel::from_json(&j, None).is_err());
    }
}
