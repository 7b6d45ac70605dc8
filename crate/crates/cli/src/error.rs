use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Numerical {
        stage: String,
        #[source]
        source: bs_core::Error,
    },

    #[error("run failed at {stage}: {message}")]
    StageFailed { stage: String, message: String },

    #[error("invariant check failed: {0}")]
    Invariant(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), message: err.to_string() }
    }

    pub fn stage(stage: impl Into<String>) -> impl FnOnce(bs_core::Error) -> Self {
        let stage = stage.into();
        move |source| CliError::Numerical { stage, source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical { .. } | CliError::StageFailed { .. } | CliError::Io { .. } => 3,
        }
    }
}
