use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of the operation
    /// (non-finite input, zero norm, `Nt >= T` for the training MSE law, ...).
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    /// Exhaustive search would exceed the enumeration budget.
    #[error("capacity exceeded: {candidates} candidates > limit {limit}")]
    Capacity { candidates: u128, limit: u128 },
    /// A Gram matrix lost rank; `dimension` is the first pivot that collapsed.
    #[error("singular system: rank lost at dimension {dimension} of {size}")]
    Singular { dimension: usize, size: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
