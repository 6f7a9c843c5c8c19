use thiserror::Error;

/// Errors produced by the captioning engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied data that violates an operation's preconditions.
    #[error("invalid input: {0}")]
    Input(String),
    /// Shapes or settings that do not fit together (e.g. embedding width mismatch).
    #[error("configuration error: {0}")]
    Config(String),
    /// A backend failed to produce a result.
    #[error("backend failure: {0}")]
    Backend(String),
    /// Broken internal invariant.
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Input(msg.into()))
}
