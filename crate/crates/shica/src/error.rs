//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by data handling, file formats and numerical routines.
#[derive(Debug, Error)]
pub enum ShicaError {
    /// A file does not follow the expected on-disk format.
    #[error("format error: {0}")]
    Format(String),

    /// Input values violate a data contract (non-finite entries, too few samples, ...).
    #[error("data error: {0}")]
    Data(String),

    /// Matrix or dataset dimensions are inconsistent.
    #[error("shape error: {0}")]
    Shape(String),

    /// Underlying I/O failure, annotated with the path involved.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A numerical routine failed; `stage` names the pipeline step.
    #[error("numerical error in {stage}: {msg}")]
    Numerical { stage: String, msg: String },

    /// The scale fixed point hit a zero denominator for one component.
    #[error("degenerate scale for component {component}: {msg}")]
    DegenerateScale { component: usize, msg: String },

    /// Invalid configuration (CLI arguments, scenario files, ...).
    #[error("config error: {0}")]
    Config(String),
}

impl ShicaError {
    /// Wraps an I/O error with the path it occurred on.
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        ShicaError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn numerical(stage: &str, msg: impl Into<String>) -> Self {
        ShicaError::Numerical {
            stage: stage.to_string(),
            msg: msg.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, ShicaError>;
