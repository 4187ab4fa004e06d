//! Self-supervised example construction and the multi-task pretraining loop.

mod adam;
mod pretrain;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use pretrain::{
    evaluate_tasks, metrics_csv, pretrain, prepare_corpus, ExampleBuilder, MetricsRow, PreparedCorpus,
    PreparedMolecule, PretrainOutcome, TaskAccuracy,
};

use crate::chem::{canonical_smiles, enumerate_with_rng, parse_smiles};
use crate::model::TaskSet;
use crate::tokenizer::{TokenSequence, Vocabulary, MASK_ID};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("sequence has no maskable content tokens")]
    NothingToMask,
    #[error("pair sampling needs at least 2 distinct molecules")]
    CorpusTooSmall,
    #[error("invalid pretraining config: {0}")]
    InvalidConfig(String),
    #[error("no usable training molecules ({skipped} skipped)")]
    EmptyCorpus { skipped: usize },
    #[error("non-finite loss at step {step}")]
    NonFinite { step: usize },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Descriptor(#[from] crate::descriptors::DescriptorError),
    #[error(transparent)]
    Smiles(#[from] crate::chem::SmilesError),
    #[error("checkpoint callback failed: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub tasks: TaskSet,
    /// Random SMILES spellings as inputs; off means canonical spellings.
    pub permute_inputs: bool,
    pub mask_fraction: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Stop after this many optimizer steps even mid-epoch.
    pub max_steps: Option<usize>,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Checkpoint every this many steps (and always at the end).
    pub checkpoint_interval: Option<usize>,
    pub log_every: usize,
    /// Descriptor set name or comma-separated ids.
    pub descriptor_set: String,
    /// Hold out validation/test molecules by hash; off trains on everything.
    pub holdout: bool,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            tasks: TaskSet::ALL,
            permute_inputs: true,
            mask_fraction: 0.15,
            batch_size: 16,
            epochs: 1,
            max_steps: None,
            adam: AdamConfig::default(),
            seed: 0,
            checkpoint_interval: None,
            log_every: 10,
            descriptor_set: "ALL_IMPLEMENTED".into(),
            holdout: true,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.tasks.count() == 0 {
            return bad("at least one task must be enabled");
        }
        if !(self.mask_fraction > 0.0 && self.mask_fraction < 1.0) {
            return bad("mask_fraction must be in (0, 1)");
        }
        if self.batch_size == 0 || self.log_every == 0 {
            return bad("batch_size and log_every must be positive");
        }
        if self.checkpoint_interval == Some(0) {
            return bad("checkpoint_interval must be positive");
        }
        if !(self.adam.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        Ok(())
    }
}

/// Masked copy of a sequence plus `(position, original id)` pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedExample {
    pub tokens: TokenSequence,
    pub positions: Vec<usize>,
    pub labels: Vec<u32>,
}

fn is_content(id: u32) -> bool {
    !Vocabulary::is_special(id)
}

/// Selects each content position with probability `fraction` (retrying
/// until at least one is chosen); selected positions become `[MASK]` 80% of
/// the time, a random content token 10%, and stay unchanged 10%.
pub fn mask_tokens<R: Rng + ?Sized>(
    seq: &TokenSequence,
    vocab: &Vocabulary,
    fraction: f64,
    rng: &mut R,
) -> Result<MaskedExample, TrainError> {
    let content: Vec<usize> = (0..seq.length).filter(|&i| is_content(seq.ids[i])).collect();
    if content.is_empty() {
        return Err(TrainError::NothingToMask);
    }
    let positions = loop {
        let chosen: Vec<usize> = content.iter().copied().filter(|_| rng.gen::<f64>() < fraction).collect();
        if !chosen.is_empty() {
            break chosen;
        }
    };
    let mut tokens = seq.clone();
    let range = vocab.content_ids();
    let labels = positions.iter().map(|&p| seq.ids[p]).collect();
    for &p in &positions {
        let r: f64 = rng.gen();
        if r < 0.8 {
            tokens.ids[p] = MASK_ID;
        } else if r < 0.9 {
            tokens.ids[p] = rng.gen_range(range.clone());
        }
    }
    Ok(MaskedExample {
        tokens,
        positions,
        labels,
    })
}

/// Seeded [`mask_tokens`] with the default 15% rate.
pub fn make_masked_example(seq: &TokenSequence, vocab: &Vocabulary, seed: u64) -> Result<MaskedExample, TrainError> {
    mask_tokens(seq, vocab, 0.15, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Enumerated spelling when `flag` is set, canonical otherwise. Unparseable
/// input is returned unchanged.
pub fn permute_input(smiles: &str, flag: bool, seed: u64) -> String {
    permute_with_rng(smiles, flag, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub fn permute_with_rng<R: Rng + ?Sized>(smiles: &str, flag: bool, rng: &mut R) -> String {
    match parse_smiles(smiles) {
        Ok(m) if flag => enumerate_with_rng(&m, rng),
        Ok(m) => canonical_smiles(&m),
        Err(_) => smiles.to_string(),
    }
}

/// Pool of molecules to draw SMILES-Eq negatives from.
pub struct PairSampler<'a> {
    smiles: &'a [String],
    canonical: Vec<String>,
}

impl<'a> PairSampler<'a> {
    pub fn new(smiles: &'a [String]) -> Result<PairSampler<'a>, TrainError> {
        let canonical = smiles
            .iter()
            .map(|s| Ok(canonical_smiles(&parse_smiles(s)?)))
            .collect::<Result<Vec<_>, TrainError>>()?;
        PairSampler::with_canonical(smiles, canonical)
    }

    pub(crate) fn with_canonical(smiles: &'a [String], canonical: Vec<String>) -> Result<PairSampler<'a>, TrainError> {
        let first = canonical.first().ok_or(TrainError::CorpusTooSmall)?;
        if canonical.iter().all(|c| c == first) {
            return Err(TrainError::CorpusTooSmall);
        }
        Ok(PairSampler { smiles, canonical })
    }

    /// Index of a molecule different from `canonical`.
    fn sample_other<R: Rng + ?Sized>(&self, canonical: &str, rng: &mut R) -> usize {
        loop {
            let j = rng.gen_range(0..self.smiles.len());
            if self.canonical[j] != canonical {
                return j;
            }
        }
    }
}

/// Anchor `a`, partner `b` and label (1 = same molecule). With equal
/// probability `b` is the anchor again or a different corpus molecule. The
/// permute flag governs both spellings: on, each is a fresh enumeration;
/// off, both are canonical.
pub fn make_pair_example<R: Rng + ?Sized>(
    anchor: &str,
    sampler: &PairSampler<'_>,
    permute: bool,
    rng: &mut R,
) -> Result<(String, String, u8), TrainError> {
    let mol = parse_smiles(anchor)?;
    let canonical = canonical_smiles(&mol);
    let spell = |m: &crate::chem::Molecule, c: &str, rng: &mut R| {
        if permute {
            enumerate_with_rng(m, rng)
        } else {
            c.to_string()
        }
    };
    let a = spell(&mol, &canonical, rng);
    if rng.gen::<bool>() {
        let b = spell(&mol, &canonical, rng);
        Ok((a, b, 1))
    } else {
        let j = sampler.sample_other(&canonical, rng);
        let other = parse_smiles(&sampler.smiles[j])?;
        let b = spell(&other, &sampler.canonical[j], rng);
        Ok((a, b, 0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// Deterministic 80/5/15 partition keyed on the canonical SMILES.
pub fn split_of(canonical: &str) -> Split {
    let digest = Sha256::digest(canonical.as_bytes());
    let x = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")) % 100;
    match x {
        0..=79 => Split::Train,
        80..=84 => Split::Validation,
        _ => Split::Test,
    }
}

/// Shuffles with a seeded generator (helper for callers that want the same
/// epoch order as the trainer).
pub fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    v
}
