use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step index must be >= 1 (got {0})")]
    ZeroIndex(u64),

    #[error("insufficient observable order: need {required}, have {available}")]
    InsufficientOrder { required: usize, available: usize },

    #[error("model derivative of order {order} unavailable ({what})")]
    MissingDerivative { what: &'static str, order: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported dimension {0} (only d = 1 is supported here)")]
    UnsupportedDimension(usize),

    #[error("scheme diverged at step {step}: {reason}")]
    Divergence { step: u64, reason: String },

    #[error("enumeration would need {outcomes} outcomes (cap {cap})")]
    EnumerationTooLarge { outcomes: u128, cap: u64 },

    #[error("innovation {0} has infinite support and cannot be enumerated")]
    NotEnumerable(&'static str),

    #[error("negative weight {0}")]
    NegativeWeight(f64),

    #[error("unknown observable '{0}'")]
    UnknownObservable(String),

    #[error("duplicate observable '{0}'")]
    DuplicateObservable(String),

    #[error("empty measure: no atoms recorded")]
    EmptyMeasure,

    #[error("not enough samples: need at least {needed}, got {got}")]
    NotEnoughSamples { needed: usize, got: usize },

    #[error("regime classifier inconsistency: numeric trend {numeric} vs analytic {analytic}")]
    RegimeInconsistency { numeric: String, analytic: String },

    #[error("{failed} of {total} replications diverged (seeds/indices: {indices:?})")]
    TooManyDivergences {
        failed: usize,
        total: usize,
        indices: Vec<u64>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown config key '{0}'")]
    UnknownKey(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
