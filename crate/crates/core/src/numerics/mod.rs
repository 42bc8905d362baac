//! Dense tensors, reverse-mode differentiation and the Adam optimizer.

mod adam;
mod params;
mod sparse;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use params::{ParamId, ParamStore};
pub use sparse::Csr;
pub use tape::{Gradients, Tape, Var, LEAKY_SLOPE, NORM_EPS, PROB_EPS};
pub use tensor::Tensor;

