use thiserror::Error;

/// Errors raised across the solver stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("zero pivot at row {index} (pivot {pivot:e}); shifted matrix is not positive definite")]
    ZeroPivot { index: usize, pivot: f64 },

    #[error("exact zero pivot at row {index} in determinant recurrence")]
    PivotBreakdown { index: usize },

    #[error("matrix is not symmetrizable: a[{index}]*c[{prev}] <= 0", prev = index - 1)]
    NotSymmetrizable { index: usize },

    #[error("block index {i} is not on the level-{r} grid of a {n}-block system")]
    IndexOutOfGrid { r: u32, i: usize, n: usize },

    #[error("zero sequence length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("block count {0} is not of the form 2^k - 1")]
    BadBlockCount(usize),

    #[error("certification conditions violated: {0}")]
    ConditionViolation(String),

    #[error("dense elimination broke down: matrix is singular")]
    Singular,

    #[error("eigen iteration did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("bound denominator is not positive ({0:e}); the error bound does not apply")]
    BoundOverflow(f64),

    #[error("determinant-bound hypothesis fails at row {0}")]
    HypothesisFailed(usize),

    #[error("missing zero-table entry ({r}, {i})")]
    MissingZeros { r: u32, i: usize },

    #[error("{0}")]
    Io(String),

    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        }
    }
}
