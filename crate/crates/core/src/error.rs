use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Spectral closed forms hold only for the unweighted Dirichlet Laplacian.
    #[error("unsupported operator: {0}")]
    UnsupportedOperator(String),

    #[error("matrix is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("degenerate zero-variance comparison: {0}")]
    DegenerateVariance(String),

    #[error("coherence score undefined: intrinsic energy is zero")]
    CoherenceUndefined,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
