use thiserror::Error;

/// Errors produced while building or applying the multigrid machinery.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AmgError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid matrix structure: {0}")]
    InvalidStructure(String),

    #[error("singular matrix: zero pivot at column {column}")]
    SingularMatrix { column: usize },

    #[error("coarsest matrix on level {level} is singular (zero pivot at column {column})")]
    SingularCoarseMatrix { level: usize, column: usize },

    #[error("zero or negative diagonal at row {row}")]
    ZeroDiagonal { row: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("NaN encountered in iteration {iteration}")]
    NotANumber { iteration: usize },

    #[error("non-positive coefficient {value} in cell {cell}")]
    NonPositiveCoefficient { cell: usize, value: f64 },

    #[error("vertex {vertex} is not aggregated")]
    Unaggregated { vertex: usize },

    #[error("communication error: {0}")]
    Communication(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for AmgError {
    fn from(e: std::io::Error) -> Self {
        AmgError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, AmgError>;
