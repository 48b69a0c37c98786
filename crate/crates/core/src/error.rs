use thiserror::Error;

/// Errors raised by the solvers and their inputs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("matrix has non-finite entries")]
    NonFinite,

    #[error("operator is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("invalid trace {0}")]
    InvalidTrace(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("matrix exponential overflow (1-norm {0:e})")]
    ExpmOverflow(f64),

    #[error("Hermiticity drift {0:e} exceeds tolerance during integration")]
    HermiticityDrift(f64),

    #[error("bloch vector norm {0} exceeds 1")]
    BlochOutOfRange(f64),

    #[error("operation requires a qubit (d = 2), got d = {0}")]
    NotQubit(usize),

    #[error("invalid rate matrix: {0}")]
    InvalidRates(String),

    #[error("rate matrix has no unique stationary distribution")]
    DegenerateChain,

    #[error("time {t1} precedes current time {t0}")]
    NonMonotonicTime { t0: f64, t1: f64 },

    #[error("step size underflow ({0:e})")]
    StepUnderflow(f64),

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("quadrature did not converge: achieved change {achieved:e} with {steps} steps")]
    QuadratureNonConvergence { achieved: f64, steps: usize },

    #[error("ambiguous initial split: Γ1 + Γ2 = 0")]
    AmbiguousInitialSplit,

    #[error("target is not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
