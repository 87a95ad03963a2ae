use std::path::PathBuf;

use thiserror::Error;

/// Process exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    Failed = 1,
    Usage = 2,
    Resource = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    /// A bad key or value, located by file line or by flag.
    #[error("{origin}: {message}")]
    Config { origin: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] exact_cantor::Error),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn config(origin: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            origin: origin.into(),
            message: message.into(),
        }
    }

    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::File {
            path: path.into(),
            source,
        }
    }

    pub fn status(&self) -> ExitStatus {
        use exact_cantor::Error as E;
        match self {
            CliError::Core(e) if e.is_resource_limit() => ExitStatus::Resource,
            CliError::Core(E::DistributionFailure(_) | E::CountFailure { .. } | E::Invariant(_)) => ExitStatus::Failed,
            _ => ExitStatus::Usage,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
