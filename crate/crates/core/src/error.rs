use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "no admissible wetting boundary value for rho_adjacent={rho_adjacent}, \
         epsilon={epsilon}, beta_w={beta_w}, dx={dx}"
    )]
    NoAdmissibleRoot {
        rho_adjacent: f64,
        epsilon: f64,
        beta_w: f64,
        dx: f64,
    },

    #[error("SPD solve stopped after {iterations} iterations with relative residual {residual:e}")]
    SolveNotConverged { iterations: usize, residual: f64 },

    #[error("proximal root search failed for rho={rho}, |m|^2={m_norm_sq}, lambda={lambda}")]
    ProxFailure {
        rho: f64,
        m_norm_sq: f64,
        lambda: f64,
    },

    #[error("non-finite value detected in {stage} at iteration {iteration}")]
    NonFinite { stage: &'static str, iteration: usize },

    #[error("bisection bracket failure: {0}")]
    Bracket(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
