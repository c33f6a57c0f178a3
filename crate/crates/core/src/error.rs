use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("potential singular at r = 0")]
    Singularity,
    #[error("quartic parameterization degenerate at eps = 1; use circular_limit_times")]
    DegenerateParameterization,
    #[error("resolvent degenerate (zeta = 0 with p_z != 0)")]
    ResolventDegeneracy,
    #[error("no saddle solution: {0}")]
    NoSolution(String),
    #[error("solution rejected: {0}")]
    Rejected(String),
    #[error("hard collision with the core at tau = {tau}")]
    HardCollision { tau: f64 },
    #[error("integration failure: {0}")]
    IntegrationFailure(String),
    #[error("electron bound (E = {energy})")]
    BoundElectron { energy: f64 },
    #[error("newton shooting did not converge (best residual {best_residual:e})")]
    NonConvergence { best_residual: f64 },
    #[error("missing data: {0}")]
    MissingData(String),
    #[error("visibility undefined for an all-zero cut")]
    UndefinedVisibility,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
