use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),

    #[error("point is not unit modulus (entry {index} has modulus {modulus})")]
    NotUnitModulus { index: usize, modulus: f64 },

    #[error("objective evaluated to a non-finite value")]
    NonFiniteObjective,

    #[error("SINR-cone projection for user {user} failed to converge (residual {residual:e})")]
    ProjectionFailed { user: usize, residual: f64 },

    #[error("effective channel matrix is rank deficient (smallest/largest singular value {0:e})")]
    RankDeficient(f64),

    #[error("SINR targets are infeasible for the fixed analog beamformer and RIS phases")]
    Infeasible,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// Whether the error came from the filesystem rather than from bad inputs.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Csv { .. })
    }
}
