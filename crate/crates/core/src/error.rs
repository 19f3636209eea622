use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("trimmer `{0}` is unbounded; only Monte-Carlo evaluation is available")]
    UnboundedTrimmer(String),
    #[error("trimmer `{0}` must be normalized to [0, 1] before theory evaluation")]
    NotNormalized(String),
    #[error("sampling ratio must exceed 1, got {0}")]
    InvalidDelta(f64),
    #[error("argument outside the domain: {0}")]
    Domain(String),
    #[error("integrand returned a non-finite value at s = {s}")]
    Integrand { s: f64 },
    #[error("no minimum of Lambda found below tau = {0:e}")]
    NoMinimum(f64),
    #[error("solver did not converge: {0}")]
    Solver(String),
    #[error("no sign change of the phase-transition indicator on [{0}, {1}]")]
    NoTransition(f64, f64),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid quadrature settings: {0}")]
    Settings(String),
    #[error("failed to parse trimmer table: {0}")]
    Table(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
