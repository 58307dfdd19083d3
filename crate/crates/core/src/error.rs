use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension {0} is odd; no fixed-point-free involution exists")]
    OddDimension(usize),
    #[error("dimension {n} is below the minimum of {min}")]
    DimensionTooSmall { n: usize, min: usize },
    #[error("matrix is not square: row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("non-finite entry at ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("|e[{i}][{j}] - e[{j}][{i}]| = {diff:e} exceeds tolerance {tol:e}")]
    AsymmetryExceedsTolerance { i: usize, j: usize, diff: f64, tol: f64 },
    #[error("|e[{i}][{i}]| = {value:e} exceeds tolerance {tol:e}")]
    DiagonalExceedsTolerance { i: usize, value: f64, tol: f64 },
    #[error("degenerate array: all centered entries vanish, variance is zero")]
    DegenerateArray,
    #[error("n = {n} exceeds the enumeration cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("indices must be distinct, got {0} twice")]
    EqualIndices(usize),
    #[error("not a fixed-point-free involution: {0}")]
    NotAnInvolution(String),
    #[error("no case of the rewiring table matched; classification bug")]
    NoCaseMatched,
    #[error("invalid norm exponent {0}; need p >= 1")]
    InvalidP(f64),
    #[error("empty sample")]
    EmptySample,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
