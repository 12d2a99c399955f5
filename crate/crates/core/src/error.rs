use thiserror::Error;

/// Errors raised by the model, estimation, inference and IO layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("latent dimension {dimension} has zero variance; cannot standardize")]
    DegenerateDimension { dimension: String },

    #[error("restricted model fits better than the full model (deviance {deviance:.6})")]
    NegativeDeviance { deviance: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("root finder did not converge: residual inf-norm {residual:.3e} after {iterations} iterations")]
    RootFinding { residual: f64, iterations: usize },

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
