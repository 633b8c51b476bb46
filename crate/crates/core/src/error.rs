use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown environment `{name}`; valid choices: {valid}")]
    UnknownEnv { name: String, valid: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("replay buffer not ready: {0}")]
    NotReady(String),

    #[error("bad magic bytes: expected {expected}, found {found}")]
    BadMagic { expected: String, found: String },

    #[error("format version {found} not supported (current version is {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("file truncated while reading {0}")]
    Truncated(String),

    #[error("corrupt data: {0}")]
    Corrupt(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for the retryable "come back with more data" signal, false for hard errors.
    pub fn is_not_ready(&self) -> bool {
        matches!(self, Error::NotReady(_))
    }
}
