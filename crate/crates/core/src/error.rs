use std::path::PathBuf;

use crate::oracle::OracleError;

/// Errors produced by the simulation, search, and evaluation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("perception window {window_s} s is shorter than the required {required_s} s")]
    PerceptionWindow { window_s: f64, required_s: f64 },

    #[error("degenerate illumination: stripe field has no positive exposure")]
    DegenerateIllumination,

    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("search budget {budget} is smaller than one generation ({population})")]
    BudgetTooSmall { budget: usize, population: usize },

    #[error("oracle failed on pair {pair}: {source}")]
    PairFailure {
        pair: usize,
        #[source]
        source: OracleError,
    },

    #[error(transparent)]
    Oracle(#[from] OracleError),

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: png decode: {message}")]
    PngDecode { path: PathBuf, message: String },

    #[error("png encode: {0}")]
    PngEncode(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
