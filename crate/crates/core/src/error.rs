use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite state at tau = {tau}")]
    NumericalBlowup { tau: f64 },

    #[error("{failed} of {total} trajectories failed numerically at epsilon = {epsilon}")]
    TooManyFailures {
        epsilon: f64,
        failed: usize,
        total: usize,
    },

    #[error("curve does not span the transition: {0}")]
    InsufficientCoverage(String),

    #[error("threshold fit did not converge after {iterations} iterations (residual {residual:e})")]
    FitFailure { iterations: usize, residual: f64 },

    #[error("threshold bracket [{lo}, {hi}] is not monotone for {cell}")]
    Bracket { lo: f64, hi: f64, cell: String },

    #[error("time step {dtau} rejected: {reason}")]
    StepSize { dtau: f64, reason: String },

    #[error("grid configuration: {0}")]
    Grid(String),

    #[error("locked and unlocked populations are not separated: {0}")]
    NotSeparated(String),

    #[error("norm drifted by {drift:e} at tau = {tau}")]
    NormDrift { drift: f64, tau: f64 },

    #[error("configuration errors:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed snapshot {}: {reason}", path.display())]
    Snapshot { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. } | Error::Config(_) | Error::Grid(_) => 2,
            Error::Io { .. } | Error::Snapshot { .. } => 4,
            _ => 3,
        }
    }
}
