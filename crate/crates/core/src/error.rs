use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed volume file: {0}")]
    Format(String),

    #[error("expected a 3D volume, found {0} dimensions")]
    Dimensionality(usize),

    #[error("mask label {0} is outside {{0, 1, 2}}")]
    Label(i64),

    #[error("interpolation method not allowed: {0}")]
    Method(String),

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("empty region of interest: {0}")]
    EmptyRoi(String),

    #[error("brain detection failed: {0}")]
    Detection(String),

    #[error("undefined value: {0}")]
    Undefined(String),

    #[error("singular design matrix: {0}")]
    Design(String),

    #[error("batch {batch} has {size} sample(s); at least 2 are required")]
    BatchSize { batch: String, size: usize },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("degenerate feature {0}: zero variance")]
    DegenerateFeature(String),

    #[error("no features selected: {0}")]
    EmptySelection(String),

    #[error("pipeline stage `{stage}` failed: {message}")]
    Pipeline { stage: String, message: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
