use thiserror::Error;

/// Errors raised across the refinement pipeline.
#[derive(Debug, Error)]
pub enum DpnError {
    #[error("dimension mismatch at index {index}: expected {expected}, got {actual}")]
    Dimension {
        index: usize,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A nearest-neighbour assignment was not unique, so the indicator is not
    /// differentiable at the current iterate.
    #[error("non-differentiable: element {element} has tied nearest candidates {candidates:?}")]
    NonDifferentiable {
        element: usize,
        candidates: Vec<usize>,
    },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("unknown problem id '{id}'; known ids: {known}")]
    UnknownProblem { id: String, known: String },

    #[error("newton step failed: {0}")]
    Solver(String),

    #[error("archive error: {0}")]
    Archive(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DpnError>;
