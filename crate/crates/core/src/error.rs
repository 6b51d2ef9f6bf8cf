use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidSpec(String),

    #[error("L = {requested} is not Fibonacci; nearest are {below}, {above}")]
    NotFibonacci {
        requested: usize,
        below: usize,
        above: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("eigensolver failed for {context}: {reason}")]
    Eigensolver { context: String, reason: String },

    #[error(
        "propagator overflow risk: dt * growth bound = {product:.1} exceeds 300; use a smaller dt"
    )]
    PropagatorOverflow { product: f64 },

    #[error("orbital rank collapse at t = {time}: relative pivot {pivot:.3e}")]
    RankCollapse { time: f64, pivot: f64 },

    #[error("numerical integrity: {0}")]
    Integrity(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidSpec(_)
            | Error::NotFibonacci { .. }
            | Error::InvalidArgument(_)
            | Error::Fit(_) => 2,
            Error::Eigensolver { .. }
            | Error::PropagatorOverflow { .. }
            | Error::RankCollapse { .. }
            | Error::Integrity(_) => 3,
            Error::Io { .. } | Error::Format { .. } => 4,
        }
    }
}
