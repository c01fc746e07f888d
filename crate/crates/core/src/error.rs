use nalgebra::DMatrix;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid label {label} at index {index} (class count {classes})")]
    InvalidLabel {
        index: usize,
        label: i64,
        classes: usize,
    },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A projection or cross-covariance collapsed to zero.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Iterative solver exceeded its iteration budget. `best` holds the last
    /// (clipped) iterate when one is available.
    #[error("convergence failure: {message}")]
    Convergence {
        message: String,
        best: Option<Box<DMatrix<f64>>>,
    },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("parse error in {source_name} at line {line}, field {field}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        field: usize,
        message: String,
    },

    #[error("preprocessing error: {0}")]
    Preprocess(String),

    #[error("split error: {0}")]
    Split(String),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical method (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Convergence { .. })
    }
}
