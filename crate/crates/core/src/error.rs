use thiserror::Error;

/// Errors raised by the estimators, diagnostics and file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("column {0} is identically zero and cannot be normalized")]
    DegenerateColumn(usize),

    #[error("design matrix is not column-normalized (max column norm {0:.6e} > 1)")]
    NotNormalized(f64),

    #[error("residual vanishes; the square-root loss is not differentiable at r = 0")]
    DegenerateResidual,

    #[error("fixed step 1/L failed to decrease the objective; use backtracking step policy")]
    StepSize,

    #[error("level s = {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
