use std::path::PathBuf;

use crate::values::ValueId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Transport,
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{what} {value} outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("incomplete survey: no answered item for value `{0}`")]
    IncompleteSurvey(ValueId),
    #[error("unparseable response: {0:?}")]
    Unparseable(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("{0}")]
    Validation(String),
    #[error("missing placeholder `{0}`")]
    MissingPlaceholder(String),
    #[error("unknown placeholder `{0}`")]
    UnknownPlaceholder(String),
    #[error("transport error after {attempts} attempt(s): {msg}")]
    Transport { attempts: u32, msg: String },
    #[error("HTTP status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("degenerate statistic: {0}")]
    Degenerate(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Transport { .. } | Error::Http { .. } => ErrorKind::Transport,
            Error::Io { .. } | Error::Json(_) => ErrorKind::Internal,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
