use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported orientation: {0}")]
    Orientation(String),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("nifti: {0}")]
    Nifti(String),

    #[error("corrupt archive: {0}")]
    CorruptArchive(String),

    #[error("architecture mismatch: archive holds `{found}`, model is `{expected}`")]
    ArchitectureMismatch { expected: String, found: String },

    #[error("model config mismatch in fields: {}", .fields.join(", "))]
    ConfigMismatch { fields: Vec<String> },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("image encoding: {0}")]
    Image(String),
}
