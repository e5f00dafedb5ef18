use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The model or parameters fall outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// Coordinate descent ran out of sweeps. Carries the best iterate seen.
    #[error("no convergence after {iterations} sweeps (kkt residual {kkt_residual:.3e})")]
    NonConvergence {
        best: Vec<f64>,
        kkt_residual: f64,
        iterations: usize,
    },

    /// A solve failed somewhere along a penalty grid.
    #[error("path fit failed at grid index {grid_index}: {source}")]
    PathNonConvergence {
        grid_index: usize,
        #[source]
        source: Box<Error>,
    },

    /// An unpenalized lag is correlated with the response, so no finite
    /// penalty level zeroes the whole fit.
    #[error("unbounded path: lag {lag} has zero weight but nonzero correlation with the response")]
    UnboundedPath { lag: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("experiment failed: {0}")]
    Experiment(String),

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
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by bad arguments or malformed input files,
    /// as opposed to runtime failures of an otherwise valid request.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Domain(_)
                | Error::UnboundedPath { .. }
                | Error::Format { .. }
                | Error::Degenerate(_)
        )
    }
}
