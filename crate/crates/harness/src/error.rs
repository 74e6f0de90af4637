use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] mcbo::error::Error),

    #[error("repeat {repeat} failed: {source}")]
    Repeat {
        repeat: usize,
        #[source]
        source: mcbo::error::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("no run data found in {0}")]
    NoData(PathBuf),
}

impl HarnessError {
    /// Short stable tag for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Model(_) => "model",
            HarnessError::Repeat { .. } => "repeat",
            HarnessError::Io { .. } => "io",
            HarnessError::Csv { .. } => "csv",
            HarnessError::Parse { .. } => "parse",
            HarnessError::NoData(_) => "no-data",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
