use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("degenerate kernel: all weights are zero")]
    DegenerateKernel,

    #[error("usage error: {0}")]
    Usage(String),

    #[error("preset `{name}` not found; available presets: {}", available.join(", "))]
    PresetNotFound {
        name: String,
        available: Vec<String>,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by how the toolkit was invoked rather than by
    /// something failing at run time.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Usage(_) | Error::PresetNotFound { .. } | Error::Config(_) | Error::Parameter(_)
        )
    }
}
