//! Network architectures: the residual and residual channel-attention
//! generators, and the conditional discriminator.

mod discriminator;
mod generator;
mod layers;

pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use generator::{
    ChannelAttention, GenVariant, Generator, GeneratorConfig, RcaBlock, ResidualBlock,
};
pub use layers::{BatchNorm2d, Conv2d, Dense, Initializer, TConv2d};

use thiserror::Error;

use crate::tensor::{Scalar, Tensor, TensorError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("model config: {0}")]
    Config(String),
}

/// Named, ordered collection of the tensors that define one network.
/// Iteration order is construction order and therefore deterministic.
pub struct ModelParams<T: Scalar> {
    pub arch: ArchTag,
    pub entries: Vec<ParamEntry<T>>,
}

pub struct ParamEntry<T: Scalar> {
    pub name: String,
    pub tensor: Tensor<T>,
    /// False for batch-norm running statistics.
    pub trainable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchTag {
    Rn,
    Rca1,
    Rca2,
    Disc,
}

impl std::fmt::Display for ArchTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ArchTag::Rn => "rn",
            ArchTag::Rca1 => "rca1",
            ArchTag::Rca2 => "rca2",
            ArchTag::Disc => "disc",
        };
        f.write_str(s)
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(arch: ArchTag) -> ModelParams<T> {
        ModelParams {
            arch,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, tensor: Tensor<T>, trainable: bool) {
        let name = name.into();
        debug_assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter name {name}"
        );
        self.entries.push(ParamEntry {
            name,
            tensor,
            trainable,
        });
    }

    pub fn trainable(&self) -> impl Iterator<Item = &ParamEntry<T>> {
        self.entries.iter().filter(|e| e.trainable)
    }

    /// Total number of trainable parameter values.
    pub fn num_trainable(&self) -> usize {
        self.trainable().map(|e| e.tensor.numel()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&ParamEntry<T>> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Record of one trainable layer in an architecture plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerRecord {
    pub name: String,
    pub kind: LayerKind,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub pad: usize,
    pub stride: usize,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    TConv,
    Dense,
    BatchNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    None,
    Relu,
    LeakyRelu,
    Sigmoid,
    Tanh,
}

impl LayerRecord {
    /// Number of trainable values this layer contributes.
    pub fn param_count(&self) -> usize {
        match self.kind {
            LayerKind::Conv | LayerKind::TConv => {
                self.in_ch * self.out_ch * self.kernel * self.kernel + self.out_ch
            }
            LayerKind::Dense => self.in_ch * self.out_ch + self.out_ch,
            LayerKind::BatchNorm => 2 * self.out_ch,
        }
    }
}

/// Trainable-value total of a whole plan.
pub fn plan_param_count(plan: &[LayerRecord]) -> usize {
    plan.iter().map(LayerRecord::param_count).sum()
}
