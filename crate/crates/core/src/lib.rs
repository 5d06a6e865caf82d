//! From-scratch building blocks for 4x single-image super-resolution with a
//! residual channel-attention GAN: a minimal reverse-mode autodiff tensor
//! engine, the generator/discriminator architectures, the composite training
//! loss, an image degradation pipeline, quality metrics, and a trainer.

pub mod gradcheck;
pub mod image;
pub mod loss;
pub mod metrics;
pub mod models;
pub mod tensor;
pub mod train;

pub use tensor::{Scalar, Tensor, TensorError};
