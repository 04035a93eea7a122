//! Error type shared across the crate.

use num_complex::Complex64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("transfer function is singular at s = {0}")]
    SingularAtS(Complex64),
    #[error("eigenvalue iteration did not converge")]
    EigFailure,
    #[error("non-finite input value")]
    NonFiniteInput,
    #[error("initial hysteresis output {xi0} is unreachable at y0 = {y0}")]
    InconsistentInitialState { xi0: f64, y0: f64 },
    #[error("forward and backward branches share no y interval")]
    NoOverlap,
    #[error("path is not closed in y (starts at {start}, ends at {end})")]
    OpenPath { start: f64, end: f64 },
    #[error("invalid sector [{alpha}, {beta}]")]
    InvalidSector { alpha: f64, beta: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
