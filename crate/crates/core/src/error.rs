use thiserror::Error;

pub type Result<T> = std::result::Result<T, TregError>;

#[derive(Debug, Error)]
pub enum TregError {
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("{op} requires at least {min} points, got {n}")]
    TooFewPoints { op: &'static str, min: usize, n: usize },

    #[error("exhaustive MST enumeration is limited to {max} points, got {n}")]
    OracleTooLarge { max: usize, n: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("optimization diverged at step {step}: {reason}")]
    Diverged { step: usize, reason: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl TregError {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        TregError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed user input rather than violated internal invariants.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            TregError::Parse(_)
                | TregError::Csv(_)
                | TregError::Json(_)
                | TregError::Io(_)
                | TregError::InvalidParameter { .. }
                | TregError::InvalidCloud(_)
                | TregError::ShapeMismatch { .. }
                | TregError::TooFewPoints { .. }
                | TregError::OracleTooLarge { .. }
        )
    }
}
