use std::path::Path;

/// Library-wide error type. Variants map onto the CLI exit-code classes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error("upstream unavailable (retryable): {0}")]
    Retryable(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("{0}")]
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for data problems, 4 for everything
    /// that fails at runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::InvalidInput(_)
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::Io { .. }
            | Error::Format(_) => 3,
            Error::Retryable(_) | Error::Divergence(_) | Error::Runtime(_) => 4,
        }
    }

    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::Retryable(_))
    }
}

pub(crate) fn invalid_input<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}

pub(crate) fn invalid_config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidConfig(msg.into()))
}
