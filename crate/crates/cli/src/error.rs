use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV {}: {msg}", path.display())]
    Csv { path: PathBuf, msg: String },

    #[error(transparent)]
    Core(#[from] missiles_core::Error),
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        CliError::Csv {
            path: path.into(),
            msg: msg.to_string(),
        }
    }

    /// Process exit code: 2 for configuration problems, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) => 2,
            _ => 1,
        }
    }
}
