//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A compressor spec that cannot be applied to the given vector.
    #[error("invalid compressor spec: {0}")]
    InvalidSpec(String),

    /// A run configuration that fails validation.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// An algorithm asked to do something it does not support
    /// (e.g. EF21 on a constrained problem).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Problem generation failed (e.g. a worker shard missing a class).
    #[error("problem generation: {0}")]
    Generation(String),

    /// Dataset parsing failed.
    #[error("dataset: {0}")]
    Dataset(String),

    /// Bad arguments to a numeric helper.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
