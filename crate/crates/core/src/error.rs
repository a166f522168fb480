use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("grid resolution underflow: {0}")]
    Resolution(String),

    #[error("model too large: {binaries} binaries, {continuous} continuous variables (caps {max_binaries}/{max_continuous})")]
    Size {
        binaries: usize,
        continuous: usize,
        max_binaries: usize,
        max_continuous: usize,
    },

    #[error("malformed model: {0}")]
    Model(String),

    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("scale limits exceeded: {0}")]
    Scale(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn schema(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            location: location.into(),
            message: message.into(),
        }
    }
}
