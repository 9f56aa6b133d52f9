//! Attention-masked single-image super-resolution.

pub mod error;
pub mod imaging;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod tensor;
pub mod train;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
