use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("group {0} has no samples")]
    EmptyGroup(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("{}", located(path, *line, msg))]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn located(path: &std::path::Path, line: u64, msg: &str) -> String {
    match (path.as_os_str().is_empty(), line) {
        (true, _) => msg.to_string(),
        (false, 0) => format!("{}: {msg}", path.display()),
        (false, l) => format!("{}:{l}: {msg}", path.display()),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
