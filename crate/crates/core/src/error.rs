use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("invalid rates: {0}")]
    Rates(String),

    #[error("invalid configuration: {0}")]
    Configuration(String),

    #[error("invalid measure: {0}")]
    Measure(String),

    #[error("invalid interval law: {0}")]
    Law(String),

    #[error("series reversion failed: residual {residual:e} at order {order}")]
    Reversion { order: usize, residual: f64 },

    #[error("negative mass {mass:e} at site {site} exceeds tolerance")]
    NegativeMass { site: usize, mass: f64 },

    #[error("argument {value} outside the validated domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("empty summary")]
    EmptySummary,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no closed form available: {0}")]
    Unavailable(String),

    #[error("integration failure: {0}")]
    Integration(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
