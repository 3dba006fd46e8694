use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("measure has no atoms")]
    EmptyMeasure,

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("unknown cube id {0}")]
    UnknownCube(usize),

    #[error("kernel singularity: evaluation point coincides with source point")]
    Singularity,

    #[error(
        "suppression profile is not 1-Lipschitz: atoms {i} and {j} differ by {excess:e} beyond their distance"
    )]
    Lipschitz { i: usize, j: usize, excess: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the error originates from the filesystem rather than from the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
