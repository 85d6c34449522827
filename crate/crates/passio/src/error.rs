use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
///
/// `Config` maps to exit code 2 in the CLI (schema/flag problems caught before
/// any work starts); every other variant maps to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Input violates a documented precondition (bad rate, short signal, ...).
    #[error("domain: {0}")]
    Domain(String),

    /// Numerically meaningless input (all-zero matrix, single-class labels).
    #[error("degenerate data: {0}")]
    Degenerate(String),

    /// Caller broke an API contract (missing feature names, shape mismatch).
    #[error("contract: {0}")]
    Contract(String),

    /// Model fitting could not proceed.
    #[error("training: {0}")]
    Training(String),

    /// Byte-level decode failure in a file or stream.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    /// Structurally valid input whose declared fields are inconsistent.
    #[error("schema violation in `{field}`: {message}")]
    Schema { field: String, message: String },

    /// Bad run configuration (file or flags). CLI exit code 2.
    #[error("config: {0}")]
    Config(String),

    /// Live session violation (channel-count change, handshake failure).
    #[error("session: {0}")]
    Session(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn degenerate(msg: impl Into<String>) -> Self {
        Error::Degenerate(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub fn training(msg: impl Into<String>) -> Self {
        Error::Training(msg.into())
    }

    pub fn parse(offset: u64, msg: impl Into<String>) -> Self {
        Error::Parse { offset, message: msg.into() }
    }

    pub fn schema(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema { field: field.into(), message: msg.into() }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn session(msg: impl Into<String>) -> Self {
        Error::Session(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code the CLI uses for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 1,
        }
    }
}
