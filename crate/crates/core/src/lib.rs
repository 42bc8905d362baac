pub mod decoder;
pub mod encoder;
pub mod error;
pub mod features;
pub mod graph;
pub mod metrics;
pub mod numerics;
pub mod train;

pub use error::{Error, Result};
