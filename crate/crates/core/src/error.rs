use alloc::string::String;

/// Errors raised anywhere in the numerical pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("structural error: {0}")]
    Structure(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("stage `{stage}` did not converge: {iterations} iterations, residual {residual:e}")]
    Divergence {
        stage: String,
        iterations: usize,
        residual: f64,
    },

    #[error("zero pivot in incomplete factorization at row {row}")]
    PivotBreakdown { row: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("eigensolver block degenerated after {restarts} restarts")]
    Degenerate { restarts: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("dense size cap exceeded: {size} > {cap}")]
    SizeCap { size: usize, cap: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
