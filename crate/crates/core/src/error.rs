use thiserror::Error;

/// Errors produced by the estimation, detection and evaluation pipeline.
#[derive(Debug, Error)]
pub enum PmimError {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("window too small: need at least {needed} samples, got {got}")]
    WindowTooSmall { needed: usize, got: usize },

    #[error("degenerate kernel matrix (trace = {trace})")]
    DegenerateKernel { trace: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },

    #[error("insufficient history: window of {window} samples cannot end at index {index}")]
    InsufficientHistory { index: usize, window: usize },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("variable pair ({i}, {j}): {source}")]
    Pair {
        i: usize,
        j: usize,
        #[source]
        source: Box<PmimError>,
    },

    #[error("model load failed: {0}")]
    ModelLoad(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PmimError {
    pub(crate) fn shape(expected: impl ToString, got: impl ToString) -> Self {
        PmimError::Shape {
            expected: expected.to_string(),
            got: got.to_string(),
        }
    }

    /// True when the error originates in an eigensolve or other floating-point failure.
    pub fn is_numerical(&self) -> bool {
        match self {
            PmimError::Numerical(_) | PmimError::DegenerateKernel { .. } => true,
            PmimError::Pair { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, PmimError>;
