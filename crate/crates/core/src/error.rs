use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors are split into two families: precondition violations (bad input,
/// bad configuration) and numerical failures. [`Error::is_numerical`] tells
/// them apart so that front ends can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid conductance function: {0}")]
    InvalidW(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error(
        "explicit step dt = {dt:e} violates the CFL bound dt <= {limit:e} \
         (cfl / (2 N^2 max(xi_x + xi_(x-1)) B))"
    )]
    CflViolation { dt: f64, limit: f64 },

    #[error("density {value} at site {site} leaves the admissible range [{lo}, {hi}]")]
    OutOfRange {
        site: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("Newton iteration did not converge after {iterations} iterations; residual trace {trace:?}")]
    NewtonDivergence { iterations: usize, trace: Vec<f64> },

    #[error("dense eigensolve requested for N = {n}, above the cap {cap}")]
    EigenCapExceeded { n: usize, cap: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("refusing to overwrite existing manifest {0} (pass --force)")]
    ManifestExists(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the numerics (as opposed to rejected input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::OutOfRange { .. }
                | Error::NewtonDivergence { .. }
                | Error::EigenCapExceeded { .. }
                | Error::Singular(_)
        )
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch { expected, got });
    }
    Ok(())
}
