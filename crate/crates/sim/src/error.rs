use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid experiment: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Numeric(#[from] qdr_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed input table: {0}")]
    Parse(String),
}
