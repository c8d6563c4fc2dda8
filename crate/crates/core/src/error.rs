use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid array configuration: {0}")]
    InvalidArray(String),

    #[error("range bin {range_bin} outside [0, {max}]")]
    RangeBinOutOfBounds { range_bin: i64, max: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("target response vanishes (|A0 s| = {0:e})")]
    SignalNull(f64),

    #[error("receive filter is zero")]
    ZeroFilter,

    #[error("initial waveform infeasible for {constraint} constraint (residual {residual:e})")]
    InfeasibleInit { constraint: &'static str, residual: f64 },

    #[error("no sufficient decrease after {backtracks} backtracks")]
    BacktrackExhausted { backtracks: usize },

    #[error("invalid solver configuration: {0}")]
    InvalidSolver(String),

    #[error("ambiguity grid: {0}")]
    Grid(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
