use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of its documented domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An input value (hex string, byte index, segment bounds, ...) is malformed.
    #[error("invalid input: {0}")]
    Input(String),

    /// Structurally valid data that cannot be processed (mismatched sets, zero RMS, ...).
    #[error("data error: {0}")]
    Data(String),

    /// The stream is not in the expected container format.
    #[error("format error: {0}")]
    Format(String),

    /// The container version is newer than this implementation understands.
    #[error("unsupported trace format version {0}")]
    UnsupportedVersion(u16),

    /// The stream ended early or its length disagrees with its header.
    #[error("truncated stream: expected {expected} bytes, got {actual}")]
    Truncated { expected: u64, actual: u64 },

    /// A stored sample is NaN or infinite.
    #[error("non-finite sample value in trace {trace}")]
    NonFiniteSample { trace: usize },

    /// Pearson correlation is undefined for the given inputs (zero variance).
    /// Distinct from a numeric failure: the inputs are valid but carry no signal.
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
