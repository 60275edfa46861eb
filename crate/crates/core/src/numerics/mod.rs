//! Minimal dense-tensor kernel: forward operations, hand-derived reverse-mode
//! gradients for the fixed layer set the models use, and a finite-difference
//! gradient checker.

pub mod gradcheck;
pub mod ops;
pub mod params;
pub mod rng;
pub mod tensor;

pub use params::{ParamId, ParamStore};
pub use rng::{RunRng, Stream};
pub use tensor::Tensor2D;
