//! Minimal neural network layers with hand-written backward passes.
//!
//! Layers own their parameters as [`Param`] tensors and expose `forward` /
//! `backward` pairs operating on flat row-major buffers. Everything is generic
//! over [`Real`] so the same code runs in `f32` for training and `f64` for
//! finite-difference checks.

mod activation;
mod adam;
mod conv;
mod gemm;
pub mod gradcheck;
pub mod init;
mod linear;
mod lstm;
mod param;
mod real;

pub use activation::{leaky_relu, leaky_relu_backward, leaky_relu_grad, leaky_relu_inplace, sigmoid, softplus};
pub use adam::{clip_grad_norm, Adam};
pub use conv::{Conv1d, Conv2d, Dims2};
pub use gemm::gemm;
pub use linear::Linear;
pub use lstm::{BiLstm, BiLstmCache, LstmDirection};
pub use param::{prefixed, Param, Parameterized};
pub use real::Real;
