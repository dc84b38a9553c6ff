use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point ({lon}, {lat}) outside scene extent")]
    OutsideExtent { lon: f64, lat: f64 },

    #[error("degenerate segment: endpoints coincide")]
    DegenerateSegment,

    #[error("invalid geohash: {0}")]
    Geohash(String),

    #[error("{field} out of range: {value}")]
    OutOfRange { field: &'static str, value: f64 },

    #[error("unknown transmitter: {0}")]
    UnknownTransmitter(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("geographic leak: geohash6 cells shared between train and test: {0:?}")]
    Leak(Vec<String>),

    #[error("path-loss model is EXTERNAL but no delegate was supplied")]
    MissingDelegate,

    #[error("feature schema mismatch: {0}")]
    Schema(String),

    #[error("bundle error: {0}")]
    Bundle(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("all {0} search trials diverged")]
    AllTrialsDiverged(usize),

    #[error("config: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable tag used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::OutsideExtent { .. } => "outside_extent",
            Error::DegenerateSegment => "degenerate_segment",
            Error::Geohash(_) => "geohash",
            Error::OutOfRange { .. } => "out_of_range",
            Error::UnknownTransmitter(_) => "unknown_transmitter",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Empty(_) => "empty_input",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Leak(_) => "leak",
            Error::MissingDelegate => "missing_delegate",
            Error::Schema(_) => "schema",
            Error::Bundle(_) => "bundle",
            Error::Parse { .. } => "parse",
            Error::AllTrialsDiverged(_) => "all_trials_diverged",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }
}
