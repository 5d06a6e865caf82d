//! Trainable layer building blocks and weight initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{BatchNormState, BnMode, Scalar, Tensor, TensorError};

use super::ModelParams;

/// He-style fan-in scaled normal initialization, deterministic given the seed.
pub struct Initializer {
    rng: ChaCha8Rng,
}

impl Initializer {
    pub fn new(seed: u64) -> Initializer {
        Initializer {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Samples N(0, 2/fan_in).
    pub fn he_normal<T: Scalar>(&mut self, shape: &[usize], fan_in: usize) -> Tensor<T> {
        let std = (2.0 / fan_in as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("std > 0");
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::from_f64(normal.sample(&mut self.rng)))
            .collect();
        Tensor::param(shape, data)
    }
}

pub struct Conv2d<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub pad: usize,
    pub stride: usize,
}

impl<T: Scalar> Conv2d<T> {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        pad: usize,
        stride: usize,
        init: &mut Initializer,
    ) -> Conv2d<T> {
        Conv2d {
            weight: init.he_normal(&[out_ch, in_ch, kernel, kernel], in_ch * kernel * kernel),
            bias: Tensor::param(&[out_ch], vec![T::zero(); out_ch]),
            pad,
            stride,
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        x.conv2d(&self.weight, Some(&self.bias), self.pad, self.stride)
    }

    pub fn register(&self, params: &mut ModelParams<T>, prefix: &str) {
        params.push(format!("{prefix}.weight"), self.weight.clone(), true);
        params.push(format!("{prefix}.bias"), self.bias.clone(), true);
    }
}

pub struct TConv2d<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub stride: usize,
}

impl<T: Scalar> TConv2d<T> {
    pub fn new(
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        init: &mut Initializer,
    ) -> TConv2d<T> {
        TConv2d {
            weight: init.he_normal(&[in_ch, out_ch, kernel, kernel], in_ch * kernel * kernel),
            bias: Tensor::param(&[out_ch], vec![T::zero(); out_ch]),
            stride,
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        x.conv2d_transposed(&self.weight, Some(&self.bias), self.stride)
    }

    pub fn register(&self, params: &mut ModelParams<T>, prefix: &str) {
        params.push(format!("{prefix}.weight"), self.weight.clone(), true);
        params.push(format!("{prefix}.bias"), self.bias.clone(), true);
    }
}

pub struct Dense<T: Scalar> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(in_f: usize, out_f: usize, init: &mut Initializer) -> Dense<T> {
        Dense {
            weight: init.he_normal(&[in_f, out_f], in_f),
            bias: Tensor::param(&[out_f], vec![T::zero(); out_f]),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>, TensorError> {
        x.dense(&self.weight, &self.bias)
    }

    pub fn register(&self, params: &mut ModelParams<T>, prefix: &str) {
        params.push(format!("{prefix}.weight"), self.weight.clone(), true);
        params.push(format!("{prefix}.bias"), self.bias.clone(), true);
    }
}

pub struct BatchNorm2d<T: Scalar> {
    pub scale: Tensor<T>,
    pub shift: Tensor<T>,
    pub state: BatchNormState<T>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> BatchNorm2d<T> {
        BatchNorm2d {
            scale: Tensor::param(&[channels], vec![T::one(); channels]),
            shift: Tensor::param(&[channels], vec![T::zero(); channels]),
            state: BatchNormState::new(channels),
        }
    }

    pub fn forward(&self, x: &Tensor<T>, mode: BnMode) -> Result<Tensor<T>, TensorError> {
        x.batch_norm(&self.scale, &self.shift, mode, &self.state)
    }

    pub fn register(&self, params: &mut ModelParams<T>, prefix: &str) {
        params.push(format!("{prefix}.scale"), self.scale.clone(), true);
        params.push(format!("{prefix}.shift"), self.shift.clone(), true);
        params.push(
            format!("{prefix}.running_mean"),
            self.state.running_mean.clone(),
            false,
        );
        params.push(
            format!("{prefix}.running_var"),
            self.state.running_var.clone(),
            false,
        );
    }
}
