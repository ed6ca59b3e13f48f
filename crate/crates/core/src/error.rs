use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data violates a documented precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// A line of a text file could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Artifacts that must agree (model and vocabulary, model and feature
    /// width) do not.
    #[error("mismatch: {0}")]
    Mismatch(String),

    /// Training produced a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
