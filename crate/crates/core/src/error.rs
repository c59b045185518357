use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension {0} is not a perfect square")]
    NotPerfectSquare(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate spectrum: eigenvalues {i} and {j} are within relative gap {gap:e}")]
    DegenerateSpectrum { i: usize, j: usize, gap: f64 },
    #[error("matrix is singular")]
    Singular,
    #[error("matrix is not hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("channel is not completely positive: {0}")]
    NotCompletelyPositive(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no structured basis for cluster {0}")]
    BasisUnavailable(usize),
    #[error("inconsistent clusters across snapshots: {0}")]
    InconsistentClusters(String),
    #[error("branch search too large: {0} candidates")]
    SearchTooLarge(u128),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
