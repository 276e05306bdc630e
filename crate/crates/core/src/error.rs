use std::io;

/// Errors raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("rank mismatch: expected rank {expected}, got {got}")]
    RankMismatch { expected: usize, got: usize },

    #[error("invalid multi-index {0:?}")]
    InvalidIndex(Vec<usize>),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("point {index} lies outside the observation window")]
    OutsideWindow { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "design matrix is numerically rank deficient (condition estimate {cond:.3e}); \
         choose a different radius schedule ({schedule})"
    )]
    RankDeficient { cond: f64, schedule: String },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("line {line}: ragged row, expected {expected} columns, found {found}")]
    Ragged { line: usize, expected: usize, found: usize },

    #[error("input contains zero points")]
    ZeroPoints,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Parameter,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::RankDeficient { .. } | Error::Quadrature(_) => ErrorKind::Numerical,
            Error::InvalidParameter(_) | Error::Unsupported(_) => ErrorKind::Parameter,
            Error::DimensionMismatch(..)
            | Error::RankMismatch { .. }
            | Error::InvalidIndex(_)
            | Error::EmptyCloud
            | Error::TooFewPoints { .. }
            | Error::OutsideWindow { .. }
            | Error::Parse { .. }
            | Error::Ragged { .. }
            | Error::ZeroPoints
            | Error::Io(_)
            | Error::Json(_) => ErrorKind::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
