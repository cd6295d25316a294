use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("arity mismatch: operator takes {expected} arguments, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("truncation order mismatch: {0} vs {1}")]
    OrderMismatch(usize, usize),
    #[error("expected grade {expected}, got {got}")]
    WrongGrade { expected: usize, got: usize },
    #[error("slot {slot} out of range for arity {arity}")]
    SlotOutOfRange { slot: usize, arity: usize },
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("vertex {vertex} has {star} outgoing edges but its field has grade {grade}")]
    StarGradeMismatch { vertex: usize, star: usize, grade: usize },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("no weight available for graph {0}")]
    MissingWeight(String),
    #[error("bivector is not Poisson (nonzero jacobiator)")]
    NotPoisson,
    #[error("matrix is not skew-symmetric")]
    NotSkew,
    #[error("operator does not vanish on constants")]
    NotVanishingOnConstants,
    #[error("inconsistent extension: {0}")]
    Inconsistent(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("io: {0}")]
    Io(String),
    #[error("json: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}
