use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series has {len} points, at least {min} are required")]
    SeriesTooShort { len: usize, min: usize },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("invalid smoothing parameters: {0}")]
    InvalidParams(String),

    #[error("forecast horizon must be >= 1, got {0}")]
    InvalidHorizon(usize),

    #[error("coverage must lie in (0, 1), got {0}")]
    InvalidCoverage(f64),

    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),

    #[error("objective is not finite at the starting point")]
    NonFiniteObjective,

    #[error("estimation failed for {country}: {reason}")]
    Estimation { country: String, reason: String },

    #[error("regression needs at least {needed} usable points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("regressor has zero variance")]
    ZeroVariance,

    #[error("log10-scale prediction requires x > 0, got {0}")]
    NonPositivePredictor(f64),

    #[error("discrepancy triple is unordered: d1 = {d1} > d2 = {d2}")]
    UnorderedTriple { d1: f64, d2: f64 },

    #[error("population must be > 0, got {0}")]
    NonPositivePopulation(f64),

    #[error("missing {what} for {country}/{year}")]
    MissingValue {
        country: String,
        year: i32,
        what: &'static str,
    },

    #[error("unknown country {0}")]
    UnknownCountry(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("bundle failed validation with {0} violation(s)")]
    Validation(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialize(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 validation, 2 estimation, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Serialize(_) => 3,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::MissingValue { .. }
            | Error::UnknownCountry(_)
            | Error::InvalidCoverage(_)
            | Error::InvalidConfig(_)
            | Error::InvalidSeries(_)
            | Error::NonPositivePopulation(_) => 1,
            _ => 2,
        }
    }
}
