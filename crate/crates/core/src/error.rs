use thiserror::Error;

/// Errors produced by grid construction, transforms and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("matrix not Hermitian: max |rho - rho^dagger| = {deviation:.3e} exceeds {tolerance:.1e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("field not normalizable: norm = {0:.3e}")]
    NotNormalizable(f64),

    #[error("bit count Q = {0} outside supported range 1..=6")]
    BitCountOutOfRange(u32),

    #[error("Q = {0} must be even to split bits between location and motion")]
    OddBitCount(u32),

    #[error("generator triple ({0}, {1}, {2}) does not commute")]
    NonCommutingTriple(usize, usize, usize),

    #[error("backward trajectory energy drift {drift:.3e} exceeds {tolerance:.1e} after {refinements} step refinements")]
    EnergyDrift {
        drift: f64,
        tolerance: f64,
        refinements: u32,
    },

    #[error("grid size {n} exceeds the cost cap {cap} for this operation")]
    GridTooLarge { n: usize, cap: usize },

    #[error("operator sequence length {0} exceeds the cap of 8")]
    SequenceTooLong(usize),

    #[error("unknown operator token '{0}' (expected X or P)")]
    BadToken(char),

    #[error("potential has no third derivative; third-order truncation needs one")]
    MissingThirdDerivative,

    #[error("tabulated potential derivative inconsistent: max deviation {0:.3e}")]
    InconsistentDerivative(f64),

    #[error("beams overlap at the slits: cross mass {0:.3e}")]
    BeamsOverlap(f64),

    #[error("state is not quantum-valid: min eigenvalue {0:.3e}")]
    NotQuantumValid(f64),

    #[error("environment perturbation violates the zero-sum constraints: {0:.3e}")]
    BadEnvironmentPerturbation(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
