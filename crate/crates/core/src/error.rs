use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient padding: {0}")]
    InsufficientPadding(String),

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("grid functions live on different masks")]
    MaskMismatch,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("zero vector has no Rayleigh quotient")]
    ZeroVector,

    #[error("eigensolver did not converge at {stage}: {detail}")]
    NotConverged { stage: String, detail: String },

    #[error("discretization failure: {0}")]
    Discretization(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
