use thiserror::Error;

use crate::diagnostics::RunReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scheme: {0}")]
    Scheme(String),

    #[error("invalid flux model: {0}")]
    Flux(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("relaxation pair ({omega_s}, {omega_a}) lies outside (0,2]x(0,2]")]
    RelaxRange { omega_s: f64, omega_a: f64 },

    #[error("relaxation pair ({omega_s}, {omega_a}) is not on the magic line omega_s + omega_a = 2")]
    NotMagic { omega_s: f64, omega_a: f64 },

    #[error("data bound must be non-negative, got {0}")]
    NegativeBound(f64),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("oracle CFL {cfl} exceeds the limit {limit}")]
    Cfl { cfl: f64, limit: f64 },

    #[error("refinement mismatch: {0}")]
    Refinement(String),

    /// Non-finite values appeared; `partial` holds everything recorded before.
    #[error("non-finite values at step {step}")]
    NonFinite { step: usize, partial: Option<Box<RunReport>> },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
