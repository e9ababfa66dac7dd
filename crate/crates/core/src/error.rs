use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("number of copies t={0} outside supported range 1..=6")]
    CopiesOutOfRange(usize),
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid permutation mapping {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("invalid partition {0:?}")]
    InvalidPartition(Vec<usize>),
    #[error("symbol {symbol} not below local dimension {d}")]
    SymbolOutOfRange { symbol: usize, d: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension {dim} exceeds dense cap {cap}")]
    CapExceeded { dim: usize, cap: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("state has no bipartition metadata")]
    MissingBipartition,
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("scheme mismatch: {0}")]
    SchemeMismatch(String),
    #[error("shot count N_M={0} below 3")]
    TooFewShots(usize),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
