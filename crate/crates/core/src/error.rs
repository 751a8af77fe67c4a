use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degree {k} outside the support [{min}, {max}]")]
    DegreeOutOfRange { k: u32, min: u32, max: u32 },

    #[error("step instability at step {step} (t = {time:.6}): fraction {value:.3e} left [0, 1]; retry with dt < {dt}")]
    Instability {
        step: usize,
        time: f64,
        value: f64,
        dt: f64,
    },

    #[error("no convergence after {iterations} iterations (last estimate {last_estimate:.12e})")]
    NonConvergence {
        iterations: usize,
        last_estimate: f64,
        last_iterate: Vec<f64>,
    },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("no outbreak: rho = {rho} does not exceed rho_c = {rho_c}")]
    NoOutbreak { rho: f64, rho_c: f64 },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures of a numerical procedure (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Instability { .. }
                | Error::NonConvergence { .. }
                | Error::InvalidMatrix(_)
                | Error::NoOutbreak { .. }
                | Error::UndefinedMetric(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
