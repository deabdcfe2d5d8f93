use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The energy cannot be minimized exactly by a cut with nonnegative capacities.
    #[error("energy not graph-representable: {0}")]
    Representability(String),

    #[error("QP did not converge after {iterations} sweeps (KKT residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("synthetic generation failed: {0}")]
    Generation(String),

    #[error("{}:{line}: {message}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unresolved reference: {0}")]
    Reference(String),
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
