use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("range error: {0}")]
    Range(String),

    #[error("overlap error: {0}")]
    Overlap(String),

    #[error("vocabulary error: label {0:?} not in vocabulary")]
    Vocabulary(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Covariance not positive definite after ridge; retry with other epsilons.
    #[error("ill-conditioned covariance (eps_x={eps_x:e}, eps_y={eps_y:e}); resample epsilon")]
    ResampleEpsilon { eps_x: f64, eps_y: f64 },

    #[error("conditioning error: {0}")]
    Conditioning(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
