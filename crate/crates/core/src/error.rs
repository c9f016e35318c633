use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A distribution or estimator parameter outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty sample: at least one draw is required")]
    EmptySample,

    #[error("insufficient data: need at least {needed} values, got {got}")]
    InsufficientData { needed: usize, got: usize },

    /// Lower and upper quartile coincide (or are reversed).
    #[error("degenerate spread: q1 = {q1} must be strictly below q3 = {q3}")]
    DegenerateSpread { q1: f64, q3: f64 },

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),

    #[error("empty input: no studies to pool")]
    EmptyInput,

    #[error("insufficient studies: need at least {needed}, got {got}")]
    InsufficientStudies { needed: usize, got: usize },

    /// Invalid simulation configuration; `key` names the offending field.
    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("all {trials} trials of cell {config_id} errored; last error: {last}")]
    DegenerateResult {
        config_id: u32,
        trials: usize,
        last: String,
    },

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
