use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("error variance must be nonnegative and finite, got {0}")]
    BadVariance(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("shape mismatch: {0}")]
    Shape(String),
}
