//! Disentangled signed directed graph convolution encoder.

mod config;
mod embedding;
mod model;
pub mod reference;

pub use config::{Aggregator, EncoderConfig};
pub use embedding::DisentangledEmbedding;
pub use model::{Encoder, EncoderParams, EncoderTrace, LayerParams};
pub use reference::{aggregate, attention_weights, dsg_conv, initial_disentangle};

pub(crate) use model::read;
