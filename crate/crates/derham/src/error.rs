use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{name}:{line}: {msg}")]
    Parse {
        name: String,
        line: usize,
        msg: String,
    },

    #[error("{}: missing field `{field}`", path.display())]
    MissingField { path: PathBuf, field: String },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] derham_core::Error),
}

impl IoError {
    pub(crate) fn parse(name: &str, line: usize, msg: impl Into<String>) -> Self {
        IoError::Parse {
            name: name.to_string(),
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::File {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, IoError>;
