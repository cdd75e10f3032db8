use thiserror::Error;

/// Errors raised by the estimation, scheduling and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OspError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("time ordering violated: {0}")]
    Ordering(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("instance too large: {0}")]
    SizeGuard(String),
}

impl OspError {
    /// True for errors caused by bad user input rather than numerical breakdown.
    pub fn is_config(&self) -> bool {
        !matches!(self, OspError::Numeric(_))
    }
}

pub type Result<T> = std::result::Result<T, OspError>;
