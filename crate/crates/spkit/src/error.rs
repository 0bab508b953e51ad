use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("operation undefined on the empty poset")]
    EmptyPoset,
    #[error("not series-parallel: elements {0:?} form an N")]
    NotSeriesParallel([usize; 4]),
    #[error("invalid poset relation: {0}")]
    BadRelation(String),
    #[error("resource bound exceeded: {0}")]
    ResourceBound(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coordinate index {index} out of range for dimension {dim}")]
    BadIndex { index: usize, dim: usize },
    #[error("zero vector belongs to the set")]
    ZeroVectorPresent,
    #[error("unsupported constraint: {0}")]
    UnsupportedFormula(String),
    #[error("semilinear conversion disagrees with the constraint at {0:?}")]
    VerificationFailed(Vec<u64>),
    #[error("validation failed: {}", .0.join("; "))]
    ValidationFailed(Vec<String>),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("not a sequentially maximal factor")]
    NotMsFactor,
    #[error("not a sequential factor")]
    NotSequentialFactor,
    #[error("incompatible coloring: factors {0:#x} and {1:#x}")]
    IncompatibleColoring(u64, u64),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("unbound variable {0}")]
    UnboundVariable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
