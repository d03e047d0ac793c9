use thiserror::Error;

/// Errors reported by the estimation and testing routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("input has no rows")]
    Empty,
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("need at least {needed} columns, got {got}")]
    TooFewColumns { needed: usize, got: usize },
    #[error("row counts differ: {left} vs {right}")]
    RowMismatch { left: usize, right: usize },
    #[error("expected dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("column {column} has zero scale")]
    DegenerateScale { column: usize },
    #[error("sample covariance is singular: eigenvalue {index} is {value:e}")]
    SingularCovariance { index: usize, value: f64 },
    #[error("regressors are collinear at column {column}")]
    Collinear { column: usize },
    #[error("matrix is singular or ill-conditioned")]
    SingularMatrix,
    #[error("matrix is not orthogonal (max deviation {deviation:e})")]
    NotOrthogonal { deviation: f64 },
    #[error("matrix is a reflection (determinant -1)")]
    Reflection,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
