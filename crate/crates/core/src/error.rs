use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("integer overflow while computing {0}")]
    Overflow(String),
    #[error("eigenvalue solver failed: {0}")]
    EigenFailure(String),
    #[error("strategy {strategy} is not supported for this basis: {reason}")]
    UnsupportedStrategy { strategy: String, reason: String },
    #[error("tensor grid of {level}^{dim} points cannot supply {requested} distinct samples")]
    InsufficientGrid {
        level: usize,
        dim: usize,
        requested: usize,
    },
    #[error("rank-one update is singular (denominator {0:e})")]
    SingularUpdate(f64),
    #[error("design construction failed at step {step}: every candidate augmentation is singular")]
    ConstructionFailure { step: usize },
    #[error("weighted measurement matrix is rank deficient: numerical rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },
    #[error("relative error undefined: reference vector has zero norm")]
    UndefinedRelativeError,
    #[error("terminal voltage never crossed the cut-off within the {horizon} s horizon")]
    HorizonExceeded { horizon: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
