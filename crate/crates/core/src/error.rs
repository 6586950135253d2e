use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("{name} = {value} is out of range (allowed 0..={max})")]
    IndexOutOfRange {
        name: &'static str,
        value: usize,
        max: usize,
    },

    #[error("Bell coefficients {0:?} do not form a probability vector")]
    InvalidBellCoeffs([f64; 4]),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid target qubits ({0}, {1}) for a {2}-qubit state")]
    InvalidTargets(usize, usize, usize),

    #[error("state is not Bell diagonal (largest off-diagonal magnitude {0:e})")]
    NotBellDiagonal(f64),

    #[error("elementary success probability is zero; the waiting time is unbounded")]
    ZeroSuccessProbability,

    #[error("distillation-round vector has length {found}, expected {expected}")]
    KVectorLength { expected: usize, found: usize },

    #[error("success-probability table is inconsistent with the configuration: {0}")]
    InconsistentTable(String),

    #[error("{0}")]
    Config(String),
}

pub(crate) fn check_prob(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            name,
            value,
            min: 0.0,
            max: 1.0,
        })
    }
}
