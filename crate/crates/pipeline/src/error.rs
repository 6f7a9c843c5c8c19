use thiserror::Error;

/// Pipeline failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad command line or configuration file.
    #[error("configuration error: {0}")]
    Config(String),
    /// Missing, unreadable or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),
    /// More than the tolerated share of videos failed.
    #[error("{failed} of {total} videos failed")]
    PartialFailure { failed: usize, total: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::PartialFailure { .. } => 2,
            Error::Data(_) => 3,
        }
    }
}

impl From<retcap::Error> for Error {
    fn from(e: retcap::Error) -> Self {
        match e {
            retcap::Error::Config(m) => Error::Config(m),
            other => Error::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Data(e.to_string())
    }
}

pub(crate) fn data_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Data(msg.into()))
}
