use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input or a violated precondition.
    Precondition,
    /// A numerical routine could not deliver its result.
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("kernel undefined beyond grid (t = {t}, grid ends at {end})")]
    BeyondGrid { t: f64, end: f64 },

    #[error("unsupported dimension {0}: expected 1, 2 or 3")]
    UnsupportedDimension(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("step too coarse for gamma: implicit trapezoid factor 1 - gamma*step/2*p0 = {factor}")]
    StepTooCoarse { factor: f64 },

    #[error("tail unresolved: {0}")]
    TailUnresolved(String),

    #[error("quadrature did not converge on [{a}, {b}]: error estimate {error}")]
    Quadrature { a: f64, b: f64, error: f64 },

    #[error("internal error: bracket expansion failed for gamma = {gamma}")]
    BracketExpansion { gamma: f64 },

    #[error("no supercritical root for gamma = {gamma}")]
    NoSupercriticalRoot { gamma: f64 },

    #[error("horizon {0} is not on the solution grid")]
    OffGrid(f64),

    #[error("malformed document: {0}")]
    Parse(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidGenerator(_)
            | Error::InvalidKernel(_)
            | Error::BeyondGrid { .. }
            | Error::UnsupportedDimension(_)
            | Error::Precondition(_)
            | Error::StepTooCoarse { .. }
            | Error::OffGrid(_)
            | Error::NoSupercriticalRoot { .. }
            | Error::Parse(_) => ErrorClass::Precondition,
            Error::TailUnresolved(_)
            | Error::Quadrature { .. }
            | Error::BracketExpansion { .. } => ErrorClass::Numerical,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
