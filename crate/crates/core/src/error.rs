use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("invalid sketch parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("block index {0} out of range [0, {1})")]
    BlockOutOfRange(usize, usize),
    #[error("materialization guard exceeded: k*d = {0} > {1}")]
    MaterializeGuard(usize, usize),
    #[error("matrix is not orthonormal: max |U^T U - I| = {0:.3e}")]
    NotOrthonormal(f64),
    #[error("zero vector")]
    ZeroVector,
    #[error("non-finite input at row {row}, col {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}:{line}: {msg}")]
    MatrixMarket {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad binary matrix file: {0}")]
    BadBinary(String),
}

pub type Result<T> = std::result::Result<T, Error>;
