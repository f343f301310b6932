use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the laboratory.
///
/// The variants are grouped so that the command-line front end can map them
/// onto process exit codes with [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid argument `{name}`: {message}")]
    InvalidArgument { name: &'static str, message: String },

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("consumption table error: {0}")]
    Table(String),

    #[error("field shape mismatch: expected {expected} values, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("singular signal: {0}")]
    SingularSignal(String),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("positivity violation at t = {t}: {message}")]
    Positivity { t: f64, message: String },

    #[error("invariant violated at t = {t}: {message}")]
    Invariant { t: f64, message: String },

    #[error("insufficient record coverage: {0}")]
    Coverage(String),

    #[error("snapshot format error in {path:?}: {message}")]
    Snapshot { path: PathBuf, message: String },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code: 2 validation, 3 numerical failure, 4 invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidGrid(_)
            | Error::InvalidArgument { .. }
            | Error::Config { .. }
            | Error::Table(_)
            | Error::Shape { .. } => 2,
            Error::SingularSignal(_)
            | Error::SolverDivergence { .. }
            | Error::Positivity { .. }
            | Error::Coverage(_)
            | Error::Snapshot { .. }
            | Error::Csv(_)
            | Error::Io { .. } => 3,
            Error::Invariant { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            message: message.into(),
        }
    }
}
