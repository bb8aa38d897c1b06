use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node index {index} out of range for graph with {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("graph has {available} edges, split needs {required}")]
    InsufficientEdges { available: usize, required: usize },

    #[error("class {class} has {available} labeled nodes, {required} shots requested")]
    InsufficientLabels {
        class: usize,
        available: usize,
        required: usize,
    },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {worst_residual:e})")]
    SolverDiverged {
        iterations: usize,
        worst_residual: f64,
        residuals: Vec<f64>,
    },

    #[error("backward root must be a scalar, got shape {rows}x{cols}")]
    InvalidRoot { rows: usize, cols: usize },

    #[error("non-finite value produced by {0}")]
    NumericalOverflow(String),

    #[error("degenerate loss: {0}")]
    DegenerateLoss(String),

    #[error("inversion diverged at step {step}: {what}")]
    InversionDiverged { step: usize, what: String },

    #[error("format error in {path}: {reason}")]
    FormatError { path: PathBuf, reason: String },

    #[error("parse error at {path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(
        context: impl Into<String>,
        expected: impl std::fmt::Display,
        actual: impl std::fmt::Display,
    ) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::FormatError {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
