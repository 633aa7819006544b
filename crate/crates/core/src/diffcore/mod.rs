//! Reverse-mode automatic differentiation over dense f64 tensors, plus the
//! ADAM optimizer. The substrate for decoder training and latent fitting.

pub mod adam;
pub mod tape;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use tape::{CustomGrad, Gradients, Tape, VarId};
pub use tensor::Tensor;
