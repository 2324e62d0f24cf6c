use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A distribution, arrival process or run configuration is malformed.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Analytic target and empirical data cannot be compared.
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("quadrature did not converge on [{lo}, {hi}]: error estimate {error:e}")]
    Quadrature { lo: f64, hi: f64, error: f64 },
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
