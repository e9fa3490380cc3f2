use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("variable index {0} is out of range")]
    UnknownVariable(usize),
    #[error("non-finite coefficient in program")]
    NonFinite,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("solver setup failed: {0}")]
    Setup(String),
}
