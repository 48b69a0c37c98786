//! Average dynamics of small quantum systems under random telegraph noise.
//!
//! Three routes to the same averaged evolution are provided:
//!
//! * [`ensemble`]: conditional density operators coupled through a classical
//!   Markov rate matrix ([`noise`]),
//! * [`born`]: the second-order (Born) memory-kernel equation, solved either
//!   through a local auxiliary operator for exponential kernels or by direct
//!   history quadrature for general kernels,
//! * [`defect`]: the system coupled to a two-level defect with Lindblad
//!   tunneling to a fermionic bath.
//!
//! On top of these, [`fidelity`] extracts process maps and average gate
//! fidelities, [`grape`] optimizes piecewise-constant NOT pulses, and
//! [`montecarlo`] averages sampled noise trajectories as an independent check.
//!
//! Units: ħ = 1, energies in units of the control bound `a_max`, times in
//! units of `1/a_max`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod born;
pub mod defect;
pub mod drive;
pub mod ensemble;
pub mod error;
pub mod fidelity;
pub mod grape;
pub mod montecarlo;
pub mod noise;
pub mod operators;
pub mod pulse;

pub use error::{Error, Result};

/// Library version embedded in output headers.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
