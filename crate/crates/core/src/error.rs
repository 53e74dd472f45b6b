use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("channel has no rows or an empty output alphabet")]
    EmptyChannel,
    #[error("row {row} has {got} entries, expected {expected}")]
    RaggedRows { row: usize, expected: usize, got: usize },
    #[error("row {row} sums to {sum}, not 1")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("entry ({row}, {col}) = {value} is negative or not finite")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("distribution entry {index} = {value} is negative or not finite")]
    InvalidProbability { index: usize, value: f64 },
    #[error("distribution sums to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("z entry {index} = {value} outside [0, 1]")]
    ZOutOfRange { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("rate {0} must be finite and nonnegative")]
    InvalidRate(f64),
    #[error("significance parameter {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("invalid tolerance policy: {0}")]
    InvalidTolerance(&'static str),
    #[error("problem too large: {what} needs {needed} entries, limit {limit}")]
    TooLarge { what: &'static str, needed: u128, limit: u128 },
    #[error("z is identically zero and has no output-distribution decomposition")]
    ZeroZ,
    #[error("linear program failed: {0}")]
    NumericalFailure(String),
    #[error("local linear program infeasible at the current input distribution")]
    InfeasibleLocalLp,
    #[error("step along the improving direction is below tolerance")]
    ZeroStep,
    #[error("off-support score cannot be raised without moving the input distribution")]
    NoDecomposition,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
