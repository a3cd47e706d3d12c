use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid supply k={0}: supply must be at least 1")]
    InvalidSupply(usize),

    #[error("probability {value} at index {index} is outside [0, 1]")]
    ProbabilityOutOfRange { index: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("target {target} is unattainable; attainable range is [{lo}, {hi}]")]
    Unattainable { target: f64, lo: f64, hi: f64 },

    #[error("{0} cannot be used as a calibration statistic")]
    UnsupportedStatistic(String),

    #[error("did not converge: {0}")]
    NoConvergence(String),

    #[error(
        "exact prophet enumeration needs {outcomes:.3e} joint outcomes (cap {cap:.0e}); use monte_carlo mode"
    )]
    EnumerationCap { outcomes: f64, cap: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
