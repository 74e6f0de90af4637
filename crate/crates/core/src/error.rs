use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix of size {size} is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { size: usize, jitter: f64 },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("candidate set of size {size} exceeds the joint-sampling cap of {cap}")]
    TooManyCandidates { size: usize, cap: usize },

    #[error("sobol dimension {requested} exceeds the direction-number table ({available})")]
    SobolDimension { requested: usize, available: usize },

    #[error("malformed direction-number table at line {line}")]
    DirectionNumbers { line: usize },

    #[error("unknown objective `{0}`")]
    UnknownObjective(alloc::string::String),

    #[error("optimum value unknown for this objective")]
    UnknownOptimum,
}

pub type Result<T> = core::result::Result<T, Error>;
