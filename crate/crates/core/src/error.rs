use thiserror::Error;

/// Errors raised by the model, dynamics, spectra and optimization layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("system is unstable (max real part of drift eigenvalues = {max_real_part:e} rad/s)")]
    Unstable { max_real_part: f64 },

    #[error("matrix (-iωI - A) is singular at ω = {omega:e} rad/s")]
    SingularSusceptibility { omega: f64 },

    #[error("eigenvalue solver failed to converge")]
    EigenSolver,

    #[error("self-consistent detuning did not converge after {iterations} iterations (last relative change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },

    #[error("no predicate change inside bracket [{lo}, {hi}]: {detail}")]
    NoCrossing { lo: f64, hi: f64, detail: String },

    #[error("time step {dt:e} s too coarse; must be at most {limit:e} s")]
    StepTooCoarse { dt: f64, limit: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
