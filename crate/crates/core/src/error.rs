use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's preconditions (dimension mismatch, empty input, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Kernel matrix could not be factored even after jitter escalation.
    #[error("kernel matrix is not positive definite (jitter reached {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    /// Every hyperparameter restart failed to produce a finite objective.
    #[error("hyperparameter optimization failed: {0}")]
    Optimization(String),

    /// No admissible destination survives the boundary filter, even after widening the field of view.
    #[error("planner stuck at ({x:.4}, {y:.4}) heading {theta:.4}: no admissible destination")]
    PlannerStuck { x: f64, y: f64, theta: f64 },

    /// Malformed grid or spec file.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Replicate traces that cannot be aggregated together.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A mission of a replicated experiment failed; other missions' artifacts were kept.
    #[error("mission {mission} aborted: {reason}")]
    MissionAborted { mission: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
