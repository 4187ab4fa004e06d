//! BERT-style encoder with relative-position attention, a tanh pooler and
//! the three pretraining heads. Forward and reverse passes are written out
//! by hand and are generic over `f32` (training) and `f64` (gradient checks).

mod embed;
mod encoder;
mod gradcheck;
mod heads;
mod params;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embed::{embed, embed_molecules, EmbedStrategy};
pub use gradcheck::{audit_gradients, GradientAudit, GRAD_FLOOR};
pub use encoder::{forward, forward_with_cache, EncoderCache, EncoderOutput};
pub(crate) use encoder::backward;
pub use heads::{
    cross_entropy, evaluate_losses, loss_and_grad, masked_lm_loss, physchem_loss, smiles_eq_loss, total_loss, LossReport,
    MaskedTarget, Targets, TaskSet,
};
pub use params::{LayerParams, Params};

/// Floating-point types the model runs in.
pub trait Real:
    LinalgScalar
    + Float
    + FromPrimitive
    + ScalarOperand
    + Debug
    + Display
    + Send
    + Sync
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + 'static
{
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("loss needs at least one {0}")]
    EmptyTask(&'static str),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub heads: usize,
    pub hidden: usize,
    pub ff: usize,
    pub vocab_size: usize,
    pub descriptor_count: usize,
    /// Relative offsets are clipped to `[-K, K]`.
    pub max_rel_distance: usize,
    pub dropout: f64,
    pub seed: u64,
    /// Training sequence capacity T. Inference may exceed it.
    pub max_len: usize,
    /// Use the token embedding table as the masked-LM output projection.
    pub tie_mlm: bool,
}

impl ModelConfig {
    /// Desk-scale preset: L=4, H=4, d=128, f=512, K=64, T=128, no dropout.
    pub fn small(vocab_size: usize, descriptor_count: usize) -> ModelConfig {
        ModelConfig {
            layers: 4,
            heads: 4,
            hidden: 128,
            ff: 512,
            vocab_size,
            descriptor_count,
            max_rel_distance: 64,
            dropout: 0.0,
            seed: 0,
            max_len: 128,
            tie_mlm: true,
        }
    }

    /// Published scale: 12 layers, 12 heads, 768 hidden, dropout 0.1.
    pub fn paper(vocab_size: usize, descriptor_count: usize) -> ModelConfig {
        ModelConfig {
            layers: 12,
            heads: 12,
            hidden: 768,
            ff: 3072,
            vocab_size,
            descriptor_count,
            max_rel_distance: 128,
            dropout: 0.1,
            seed: 0,
            max_len: 128,
            tie_mlm: true,
        }
    }

    /// d=8, L=1 model used for gradient audits.
    pub fn tiny(vocab_size: usize, descriptor_count: usize) -> ModelConfig {
        ModelConfig {
            layers: 1,
            heads: 2,
            hidden: 8,
            ff: 16,
            vocab_size,
            descriptor_count,
            max_rel_distance: 3,
            dropout: 0.0,
            seed: 0,
            max_len: 16,
            tie_mlm: true,
        }
    }

    pub fn preset(name: &str, vocab_size: usize, descriptor_count: usize) -> Option<ModelConfig> {
        match name {
            "small" => Some(ModelConfig::small(vocab_size, descriptor_count)),
            "paper" => Some(ModelConfig::paper(vocab_size, descriptor_count)),
            "tiny" => Some(ModelConfig::tiny(vocab_size, descriptor_count)),
            _ => None,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.heads == 0 || self.hidden == 0 || self.hidden % self.heads != 0 {
            return bad(format!("hidden {} not divisible by heads {}", self.hidden, self.heads));
        }
        if self.max_rel_distance < 1 {
            return bad("max_rel_distance must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.vocab_size < crate::tokenizer::NUM_SPECIAL + 1 {
            return bad(format!("vocab_size {} too small", self.vocab_size));
        }
        if self.ff == 0 || self.max_len < 3 {
            return bad("ff and max_len must be positive (max_len >= 3)".into());
        }
        Ok(())
    }

    /// Number of learnable scalars.
    pub fn parameter_count(&self) -> usize {
        let (d, f, v, dh, k) = (self.hidden, self.ff, self.vocab_size, self.head_dim(), self.max_rel_distance);
        let layer = 4 * d * d + 4 * d + (2 * k + 1) * dh + 2 * d + 2 * d + d * f + f + f * d + d + 2 * d;
        let mlm = if self.tie_mlm { v } else { v * d + v };
        v * d + 2 * d + 2 * d + self.layers * layer + d * d + d + mlm + 2 * d + 2 + self.descriptor_count * (d + 1)
    }
}
