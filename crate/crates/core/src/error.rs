use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid age grid: {0}")]
    InvalidGrid(String),

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("profiles live on different age grids")]
    GridMismatch,

    #[error("invalid demography: {0}")]
    InvalidDemography(String),

    #[error("mortality must be positive for the closed-form reproduction number")]
    DegenerateDemography,

    #[error("invalid epidemic parameters: {0}")]
    InvalidParams(String),

    #[error("grid spacing {spacing} too coarse for rate {rate} (need rate * spacing <= 2)")]
    GridTooCoarse { rate: f64, spacing: f64 },

    #[error("conservation violated at t = {t}, age = {age}: residual {residual:e}")]
    ConservationViolation { t: f64, age: f64, residual: f64 },

    #[error("could not bracket the endemic force of infection below h = {h_hi}")]
    NoBracket { h_hi: f64 },

    #[error("average age of infection is undefined without infection (h = 0)")]
    NoInfection,

    #[error("vaccination kernels failed the linearization check: mismatch {mismatch:e} at age {age}")]
    KernelMismatch { age: f64, mismatch: f64 },

    #[error("invalid vaccination policy: {0}")]
    InvalidPolicy(String),

    #[error("no vaccination policy meets the prevalence cap and constraints")]
    Infeasible,

    #[error("self-consistent iteration did not converge after {} iterations", history.len())]
    NotConverged { history: Vec<f64> },
}
