use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("no models")]
    NoModels,

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("brute force would examine {required} subsets, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u64 },
}

/// Failure of a model oracle. Surfaced by the sequential test as an aborted
/// verdict, never as an answer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("unknown question id {0:?}")]
    UnknownQuestion(String),

    #[error("timed out waiting for an answer")]
    Timeout,

    #[error("transport error: {0}")]
    Transport(String),

    #[error("protocol error: {0}")]
    Protocol(String),
}
