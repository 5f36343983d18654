use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("integral does not converge: {0}")]
    DivergentIntegral(String),
    #[error("quadrature failed to reach tolerance {tolerance:e} (estimated error {estimate:e}) on [{lower}, {upper}]")]
    QuadratureNonConvergence {
        lower: f64,
        upper: f64,
        tolerance: f64,
        estimate: f64,
    },
    #[error("spectral density is negative at rho = {rho}: f = {value}")]
    NegativeDensity { rho: f64, value: f64 },
    #[error("radial inverse CDF failed: {0}")]
    InverseCdf(String),
    #[error("operation not supported on domain {0}")]
    UnsupportedDomain(String),
    #[error("conditional law is degenerate: {0}")]
    Nondegeneracy(String),
    #[error("covariance is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
