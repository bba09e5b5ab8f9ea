use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid format: {0}")]
    InvalidFormat(String),

    #[error("overflow rounding {value:e} to {format}")]
    Overflow { value: f64, format: String },

    #[error("overflow rounding {} matrix entries to {format}, first at {:?}", entries.len(), entries.first())]
    MatrixOverflow { entries: Vec<(usize, usize)>, format: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix: zero pivot at column {column}")]
    Singular { column: usize },

    #[error("dense operation on n = {n} exceeds the configured cap {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not symmetric")]
    NotSymmetric,

    #[error("zero row {0} in scaling")]
    ZeroRow(usize),

    #[error("zero column {0} in scaling")]
    ZeroColumn(usize),

    #[error("zero diagonal entry at {0}")]
    ZeroDiagonal(usize),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("subdomain {subdomain}: {source}")]
    Subdomain {
        subdomain: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("eigenvalue computation did not converge")]
    EigenNoConvergence,

    #[error("M-matrix property violated: {0}")]
    NotMMatrix(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("iteration {0} was not retained")]
    NotRetained(usize),

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn in_subdomain(self, subdomain: usize) -> Error {
        Error::Subdomain { subdomain, source: Box::new(self) }
    }
}
