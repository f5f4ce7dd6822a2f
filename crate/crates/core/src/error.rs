use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("unknown axis label `{0}`")]
    UnknownLabel(String),
    #[error("extent mismatch on `{a}` ({ea}) vs `{b}` ({eb})")]
    ExtentMismatch { a: String, ea: usize, b: String, eb: usize },
    #[error("axis `{0}` paired more than once")]
    DuplicatePairing(String),
    #[error("memory cap exceeded: {needed} entries requested, cap {cap}")]
    MemoryCap { needed: usize, cap: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
