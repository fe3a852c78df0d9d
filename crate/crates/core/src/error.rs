use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("tensor `{name}`: {reason}")]
    Tensor { name: String, reason: String },

    #[error("solver produced a non-finite value in phase {phase}")]
    SolverDiverged { phase: usize },

    #[error("undefined metric: {0}")]
    Undefined(&'static str),

    #[error("malformed {format} data: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Stable machine-readable code, used by the CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::Tensor { .. } => "tensor_mismatch",
            Error::SolverDiverged { .. } => "solver_diverged",
            Error::Undefined(_) => "undefined_metric",
            Error::Format { .. } => "format_error",
            Error::Io(_) => "io_error",
            Error::Json(_) => "json_error",
            Error::Image(_) => "image_error",
        }
    }
}
