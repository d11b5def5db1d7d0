use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible matrix shapes.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A matrix expected to be (semi)definite failed to factorize.
    #[error("matrix is not positive definite: {0}")]
    Indefinite(String),

    /// NaN or infinity where finite values are required.
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    /// Argument outside its valid range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Experiment configuration problem.
    #[error("config error: {0}")]
    Config(String),

    /// Dataset parsing or layout problem.
    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// Backend eigensolver/factorization failure.
    #[error("linear algebra backend error: {0}")]
    Backend(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}
