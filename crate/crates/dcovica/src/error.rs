use dcovica_core::Error as CoreError;
use thiserror::Error;

/// Exit code for malformed input, arguments or configuration.
pub const EXIT_BAD_INPUT: i32 = 2;
/// Exit code for data the methods cannot handle (constant columns, singular
/// covariance, collinear regressors).
pub const EXIT_DEGENERATE: i32 = 3;
/// Exit code when the optimizer stopped before converging; outputs are still
/// written.
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(
                CoreError::DegenerateScale { .. }
                | CoreError::SingularCovariance { .. }
                | CoreError::Collinear { .. }
                | CoreError::SingularMatrix,
            ) => EXIT_DEGENERATE,
            _ => EXIT_BAD_INPUT,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
