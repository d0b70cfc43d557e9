use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not hermitian: defect {defect:e} exceeds tolerance {tolerance:e}")]
    NotHermitian { defect: f64, tolerance: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },

    #[error("fermion occupation bound violated: max eigenvalue {max_eigenvalue} > 1")]
    AboveFermiBound { max_eigenvalue: f64 },

    #[error("trace is not a nonnegative real number: {re} + {im}i")]
    InvalidTrace { re: f64, im: f64 },

    #[error("rates[({to},{from})]: negative rate {rate}")]
    NegativeRate { to: usize, from: usize, rate: f64 },

    #[error("rates[({index},{index})]: self-transitions are not allowed")]
    SelfTransition { index: usize },

    #[error("orbital index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("basis is not orthonormal: Gram defect {defect:e}")]
    NotOrthonormal { defect: f64 },

    #[error("dephasing[({a},{b})]: {reason}")]
    InvalidDephasing { a: usize, b: usize, reason: String },

    #[error("occupation f[{index}] = {value} outside the admissible range")]
    InvalidOccupation { index: usize, value: f64 },

    #[error("operation requires {expected} statistics")]
    WrongStatistics { expected: &'static str },

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("integration diverged at t = {t}")]
    Diverged { t: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A scenario field failed validation.
    #[error("{field}: {message}")]
    Config { field: String, message: String },

    #[error("malformed scenario: {0}")]
    Parse(String),

    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
