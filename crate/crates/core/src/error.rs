use thiserror::Error;

/// Errors raised by code construction, spectra, detection and rate computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Hadamard order must be a power of two in [1, 2^20], got {0}")]
    InvalidOrder(usize),

    #[error("phase count must be at least 1, got {0}")]
    InvalidPhaseCount(usize),

    #[error("energy must be finite and non-negative, got {0}")]
    InvalidEnergy(f64),

    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("PSK eigenvalue λ_{index} = {value:e} is negative beyond rounding")]
    NegativeEigenvalue { index: usize, value: f64 },

    #[error("codebook of {size} states exceeds the dense oracle cap of {cap}")]
    OracleTooLarge { size: usize, cap: usize },

    #[error("eigendecomposition produced a non-finite value")]
    EigenFailure,

    #[error("invalid quadrature configuration: {0}")]
    InvalidQuadrature(&'static str),

    #[error("quadrature did not converge: error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    QuadratureNonConvergence { estimate: f64, tolerance: f64 },

    #[error("splitting steps must be at least 1")]
    InvalidSteps,

    #[error("unsupported combination: {kind} with M = {phases}")]
    Unsupported { kind: &'static str, phases: usize },

    #[error("row {row} sums to {sum} (tolerance {tolerance:e})")]
    NotRowStochastic { row: usize, sum: f64, tolerance: f64 },

    #[error("probability entry ({row}, {col}) = {value} lies outside [0, 1]")]
    InvalidProbability { row: usize, col: usize, value: f64 },

    #[error("set of code lengths is empty")]
    EmptyLengthSet,

    #[error("energy grid: {0}")]
    InvalidGrid(&'static str),

    #[error("simulation needs at least one trial")]
    InvalidTrials,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_energy(energy: f64) -> Result<f64> {
    if energy.is_finite() && energy >= 0.0 {
        Ok(energy)
    } else {
        Err(Error::InvalidEnergy(energy))
    }
}

pub(crate) fn check_phases(phases: usize) -> Result<usize> {
    if phases >= 1 {
        Ok(phases)
    } else {
        Err(Error::InvalidPhaseCount(phases))
    }
}

pub(crate) fn check_index(what: &'static str, index: usize, limit: usize) -> Result<()> {
    if index < limit {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, limit })
    }
}
