use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: column `{0}` not found in header")]
    MissingColumn(String),

    #[error("parse error at data row {row}, column `{column}`: cannot parse `{value}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("invalid record at data row {row}: {reason}")]
    InvalidRecord { row: usize, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("training error: {0}")]
    Training(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: prediction loss {prediction_loss}, adversary loss {adversary_loss}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        prediction_loss: f64,
        adversary_loss: f64,
    },

    #[error("tuning failed for every configuration: {0}")]
    Tuning(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
