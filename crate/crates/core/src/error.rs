use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration value violates a documented precondition.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix dimension {n} exceeds the dense eigen-solver limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("simulation aborted at t = {time_ns} ns: {reason}")]
    Simulation { time_ns: f64, reason: String },

    #[error("decay measurement failed: {0}")]
    Decay(String),

    #[error("spectrum: {0}")]
    Spectrum(String),

    #[error("spec/bit-width mismatch: {0}")]
    HdlMismatch(String),

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
