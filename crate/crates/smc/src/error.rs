//! Crate-wide error type and result alias.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument violates a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Automatic region-of-interest detection found no pixel at or above the
    /// threshold.
    #[error("empty ROI: no pixel reaches threshold {threshold}")]
    EmptyRoi { threshold: f64 },

    /// A co-occurrence matrix was requested for a window with no valid pixel
    /// pairs under the given offsets.
    #[error("empty GLCM: window admits no pixel pair for the given offsets")]
    EmptyGlcm,

    /// A labeled class is empty or too small for the requested operation.
    #[error("degenerate class structure: {0}")]
    DegenerateClass(String),

    /// A CF-tree produced fewer leaf subclusters than requested clusters.
    #[error("CF-tree produced {subclusters} leaf subclusters but {requested} clusters were requested")]
    TooFewSubclusters { subclusters: usize, requested: usize },

    /// Numerical failure (non-finite intermediate, singular system, or a
    /// factorization that lost positive definiteness).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image decode/encode error: {0}")]
    Image(#[from] image::ImageError),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Config(String),

    /// A cross-validation fold failed; identifies the fold and wraps the
    /// underlying cause.
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Shorthand for `Error::InvalidInput` with a formatted message.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Stable machine-readable discriminant for CLI error reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::EmptyRoi { .. } => "empty_roi",
            Error::EmptyGlcm => "empty_glcm",
            Error::DegenerateClass(_) => "degenerate_class",
            Error::TooFewSubclusters { .. } => "too_few_subclusters",
            Error::Numerical(_) => "numerical",
            Error::Io(_) => "io",
            Error::Image(_) => "image",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
            Error::Fold { source, .. } => source.kind(),
        }
    }

    /// Attaches a fold index to an error bubbling out of one fold's work.
    pub fn in_fold(self, fold: usize) -> Self {
        Error::Fold { fold, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
