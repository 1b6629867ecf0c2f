use thiserror::Error;

/// Errors raised by the samplers, diagnostics and example models.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid prior: {0}")]
    Prior(String),

    #[error("argument outside of domain: {0}")]
    Domain(String),

    #[error("likelihood evaluation failed at theta = {theta:?}: {reason}")]
    Likelihood { theta: Vec<f64>, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("degenerate level {level}: {reason}")]
    DegenerateLevel { level: usize, reason: String },

    #[error("likelihood bound violated: ln L = {log_lik} exceeds ln(1/c) = {log_c_inv} at theta = {theta:?}")]
    BoundViolation {
        theta: Vec<f64>,
        log_lik: f64,
        log_c_inv: f64,
    },

    #[error("quadrature did not converge: achieved error {achieved:e}, requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
