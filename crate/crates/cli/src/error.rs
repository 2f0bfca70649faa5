use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("unknown preset `{0}` (expected soliton1, soliton2, l2data or custom)")]
    UnknownPreset(String),

    #[error("the custom preset needs a --config file")]
    CustomNeedsConfig,

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("malformed configuration: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] kdvfd_core::KdvError),

    #[error("preset {0} has no exact solution to compare with")]
    NoExactSolution(String),
}

impl CliError {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}
