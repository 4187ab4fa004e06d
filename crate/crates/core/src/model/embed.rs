use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{forward, ModelConfig, Params, Real};
use crate::tokenizer::{TokenSequence, Tokenizer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedStrategy {
    /// The tanh-pooled position-0 state.
    Pooled,
    /// Average of the sequence output over non-PAD positions.
    MeanSequence,
}

impl FromStr for EmbedStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pooled" => Ok(EmbedStrategy::Pooled),
            "mean_sequence" | "mean" => Ok(EmbedStrategy::MeanSequence),
            _ => Err(format!("unknown embedding strategy '{s}' (pooled, mean_sequence)")),
        }
    }
}

/// One row per input sequence.
pub fn embed<F: Real>(
    params: &Params<F>,
    cfg: &ModelConfig,
    batch: &[TokenSequence],
    strategy: EmbedStrategy,
) -> Array2<F> {
    let out = forward(params, cfg, batch);
    match strategy {
        EmbedStrategy::Pooled => out.pooled,
        EmbedStrategy::MeanSequence => {
            let mut m = Array2::zeros((batch.len(), cfg.hidden));
            for (b, seq) in batch.iter().enumerate() {
                let rows = out.sequence_of(b);
                let used: Vec<usize> = (0..seq.ids.len()).filter(|&i| seq.attention_mask[i] != 0).collect();
                let sel = rows.select(Axis(0), &used);
                m.row_mut(b).assign(&(sel.sum_axis(Axis(0)) / F::c(used.len().max(1) as f64)));
            }
            m
        }
    }
}

/// Embeds SMILES strings in chunks of `batch_size`. Inputs are encoded at
/// their own length, so they may exceed the training window.
pub fn embed_molecules<F: Real, S: AsRef<str>>(
    params: &Params<F>,
    cfg: &ModelConfig,
    tokenizer: &Tokenizer,
    smiles: &[S],
    strategy: EmbedStrategy,
    batch_size: usize,
) -> Array2<F> {
    let mut out = Array2::zeros((smiles.len(), cfg.hidden));
    let seqs: Vec<TokenSequence> = smiles.iter().map(|s| tokenizer.encode_single_unbounded(s.as_ref())).collect();
    for (c, chunk) in seqs.chunks(batch_size.max(1)).enumerate() {
        let e = embed(params, cfg, chunk, strategy);
        let start = c * batch_size.max(1);
        out.slice_mut(ndarray::s![start..start + chunk.len(), ..]).assign(&e);
    }
    out
}
