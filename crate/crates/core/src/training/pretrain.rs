use std::fmt::Write as _;

use log::{info, warn};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    adam_step, make_pair_example, mask_tokens, permute_with_rng, split_of, AdamState, PairSampler, PretrainConfig,
    Split, TrainError,
};
use crate::chem::{canonical_smiles, parse_smiles, Molecule};
use crate::descriptors::{compute_descriptors, fit_normalizer, DescriptorSet, Normalizer};
use crate::model::{evaluate_losses, loss_and_grad, MaskedTarget, ModelConfig, Params, Targets};
use crate::tokenizer::{TokenSequence, Tokenizer, Vocabulary};

#[derive(Debug, Clone)]
pub struct PreparedMolecule {
    pub smiles: String,
    pub canonical: String,
    pub mol: Molecule,
    pub split: Split,
    /// Normalized descriptor targets.
    pub targets: Vec<f32>,
}

/// Parsed corpus with descriptor targets and a fitted normalizer.
#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub molecules: Vec<PreparedMolecule>,
    pub normalizer: Normalizer,
    /// `(index in input, message)` of entries that failed to parse.
    pub skipped: Vec<(usize, String)>,
}

impl PreparedCorpus {
    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.molecules.len()).filter(|&i| self.molecules[i].split == split).collect()
    }
}

/// Parses, splits (hash-based when `holdout`, else everything is training
/// data) and fits the descriptor normalizer on the training split.
pub fn prepare_corpus(
    smiles: &[String],
    set: &DescriptorSet,
    holdout: bool,
    seed: u64,
) -> Result<PreparedCorpus, TrainError> {
    let mut skipped = Vec::new();
    let mut parsed = Vec::new();
    for (i, s) in smiles.iter().enumerate() {
        match parse_smiles(s) {
            Ok(mol) => parsed.push((s.clone(), mol)),
            Err(e) => {
                warn!("skipping corpus entry {}: {e}", i + 1);
                skipped.push((i, e.to_string()));
            }
        }
    }
    let raw: Vec<_> = parsed.iter().map(|(_, m)| compute_descriptors(m, set)).collect();
    let canon: Vec<String> = parsed.iter().map(|(_, m)| canonical_smiles(m)).collect();
    let splits: Vec<Split> = canon
        .iter()
        .map(|c| if holdout { split_of(c) } else { Split::Train })
        .collect();
    let train_vectors = raw
        .iter()
        .zip(&splits)
        .filter(|(_, s)| **s == Split::Train)
        .map(|(v, _)| v.clone())
        .collect::<Vec<_>>();
    if train_vectors.is_empty() {
        return Err(TrainError::EmptyCorpus { skipped: skipped.len() });
    }
    let normalizer = fit_normalizer(set, train_vectors, seed)?;
    let molecules = parsed
        .into_iter()
        .zip(canon)
        .zip(splits)
        .zip(&raw)
        .map(|((((smiles, mol), canonical), split), v)| PreparedMolecule {
            smiles,
            canonical,
            mol,
            split,
            targets: normalizer
                .normalize(v)
                .expect("same descriptor set")
                .into_iter()
                .map(|x| x as f32)
                .collect(),
        })
        .collect();
    Ok(PreparedCorpus {
        molecules,
        normalizer,
        skipped,
    })
}

/// Builds training batches for the active tasks.
pub struct ExampleBuilder<'a> {
    pub tokenizer: Tokenizer,
    cfg: &'a PretrainConfig,
    corpus: &'a PreparedCorpus,
    pool: Vec<String>,
    pool_canonical: Vec<String>,
}

const PAIR_ATTEMPTS: usize = 5;

impl<'a> ExampleBuilder<'a> {
    /// Negatives for SMILES-Eq are drawn from `pool` (indices into the
    /// corpus).
    pub fn new(
        cfg: &'a PretrainConfig,
        corpus: &'a PreparedCorpus,
        pool: &[usize],
        capacity: usize,
    ) -> Result<ExampleBuilder<'a>, TrainError> {
        let b = ExampleBuilder {
            tokenizer: Tokenizer::new(Vocabulary::smiles_default(), capacity),
            cfg,
            corpus,
            pool: pool.iter().map(|&i| corpus.molecules[i].smiles.clone()).collect(),
            pool_canonical: pool.iter().map(|&i| corpus.molecules[i].canonical.clone()).collect(),
        };
        if cfg.tasks.smiles_eq {
            PairSampler::with_canonical(&b.pool, b.pool_canonical.clone())?;
        }
        Ok(b)
    }

    fn encode(&self, m: &PreparedMolecule, rng: &mut ChaCha8Rng) -> Result<Option<(TokenSequence, u8)>, TrainError> {
        let permute = self.cfg.permute_inputs;
        for _ in 0..PAIR_ATTEMPTS {
            if self.cfg.tasks.smiles_eq {
                let sampler = PairSampler::with_canonical(&self.pool, self.pool_canonical.clone())?;
                let (a, b, y) = make_pair_example(&m.smiles, &sampler, permute, rng)?;
                if let Ok(seq) = self.tokenizer.encode_pair(&a, &b) {
                    return Ok(Some((seq.trimmed(), y)));
                }
            } else {
                let a = permute_with_rng(&m.smiles, permute, rng);
                if let Ok(seq) = self.tokenizer.encode_single(&a) {
                    return Ok(Some((seq.trimmed(), 0)));
                }
            }
        }
        Ok(None)
    }

    /// Sequences and targets for the given corpus indices. Anchors that do
    /// not fit the window after several draws are dropped (second value).
    pub fn build_batch(
        &self,
        anchors: &[usize],
        rng: &mut ChaCha8Rng,
    ) -> Result<(Vec<TokenSequence>, Targets<f32>, usize), TrainError> {
        let tasks = self.cfg.tasks;
        let mut seqs = Vec::with_capacity(anchors.len());
        let mut targets = Targets::default();
        let mut pc_rows: Vec<&[f32]> = Vec::new();
        let mut dropped = 0;
        for &i in anchors {
            let m = &self.corpus.molecules[i];
            let Some((seq, y)) = self.encode(m, rng)? else {
                dropped += 1;
                continue;
            };
            let seq = if tasks.masked_lm {
                let ex = mask_tokens(&seq, &self.tokenizer.vocab, self.cfg.mask_fraction, rng)?;
                let b = seqs.len();
                for (&pos, &label) in ex.positions.iter().zip(&ex.labels) {
                    targets.masked.push(MaskedTarget { seq: b, pos, label });
                }
                ex.tokens
            } else {
                seq
            };
            seqs.push(seq);
            targets.eq_labels.push(y);
            pc_rows.push(&m.targets);
        }
        if tasks.physchem && !seqs.is_empty() {
            let d = pc_rows[0].len();
            targets.physchem = Some(Array2::from_shape_fn((pc_rows.len(), d), |(r, c)| pc_rows[r][c]));
        }
        Ok((seqs, targets, dropped))
    }
}

/// One line of the metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: usize,
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_mlm: Option<f64>,
    pub loss_eq: Option<f64>,
    pub loss_physchem: Option<f64>,
    pub val_loss: Option<f64>,
    pub mlm_accuracy: Option<f64>,
    pub eq_accuracy: Option<f64>,
}

/// CSV with header `step,epoch,loss_total,loss_mlm,loss_eq,loss_physchem,val_loss`;
/// inactive values are left empty.
pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from("step,epoch,loss_total,loss_mlm,loss_eq,loss_physchem,val_loss\n");
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.step,
            r.epoch,
            r.loss_total,
            opt(r.loss_mlm),
            opt(r.loss_eq),
            opt(r.loss_physchem),
            opt(r.val_loss)
        );
    }
    out
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub params: Params<f32>,
    pub normalizer: Normalizer,
    pub metrics: Vec<MetricsRow>,
    pub steps: usize,
    pub skipped_parse: usize,
    pub skipped_overflow: usize,
    pub train_size: usize,
    pub validation_size: usize,
}

pub type CheckpointFn<'a> = dyn FnMut(usize, &Params<f32>, &Normalizer) -> Result<(), String> + 'a;

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Multi-task pretraining from a list of SMILES. The checkpoint callback is
/// invoked every `checkpoint_interval` steps and once at the end.
pub fn pretrain(
    corpus: &[String],
    cfg: &PretrainConfig,
    model_cfg: &ModelConfig,
    mut on_checkpoint: Option<&mut CheckpointFn<'_>>,
) -> Result<PretrainOutcome, TrainError> {
    cfg.validate()?;
    model_cfg.validate()?;
    let set = DescriptorSet::parse(&cfg.descriptor_set)?;
    if model_cfg.descriptor_count != set.len() {
        return Err(TrainError::InvalidConfig(format!(
            "model has {} descriptor outputs but set '{}' has {}",
            model_cfg.descriptor_count,
            cfg.descriptor_set,
            set.len()
        )));
    }
    let vocab_len = Vocabulary::smiles_default().len();
    if model_cfg.vocab_size != vocab_len {
        return Err(TrainError::InvalidConfig(format!(
            "model vocab_size {} != tokenizer vocabulary {vocab_len}",
            model_cfg.vocab_size
        )));
    }
    let prepared = prepare_corpus(corpus, &set, cfg.holdout, cfg.seed)?;
    let train = prepared.indices(Split::Train);
    let val = prepared.indices(Split::Validation);
    if train.is_empty() {
        return Err(TrainError::EmptyCorpus {
            skipped: prepared.skipped.len(),
        });
    }
    info!(
        "pretraining on {} molecules ({} validation, {} skipped)",
        train.len(),
        val.len(),
        prepared.skipped.len()
    );
    let builder = ExampleBuilder::new(cfg, &prepared, &train, model_cfg.max_len)?;

    let mut params: Params<f32> = Params::init(model_cfg);
    let mut adam = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut metrics = Vec::new();
    let mut step = 0;
    let mut overflow = 0;
    let max_steps = cfg.max_steps.unwrap_or(usize::MAX);

    'epochs: for epoch in 0..cfg.epochs {
        let mut order = train.clone();
        order.shuffle(&mut rng);
        let mut last: Option<MetricsRow> = None;
        for chunk in order.chunks(cfg.batch_size) {
            if step >= max_steps {
                break 'epochs;
            }
            let (seqs, targets, dropped) = builder.build_batch(chunk, &mut rng)?;
            overflow += dropped;
            if seqs.is_empty() {
                continue;
            }
            let (report, grads) = loss_and_grad(&params, model_cfg, &seqs, cfg.tasks, &targets, Some(&mut rng))?;
            if !report.total.is_finite() || !grads.all_finite() {
                return Err(TrainError::NonFinite { step: step + 1 });
            }
            adam_step(&mut params, &grads, &mut adam, &cfg.adam);
            step += 1;
            let row = MetricsRow {
                step,
                epoch,
                loss_total: report.total,
                loss_mlm: report.mlm,
                loss_eq: report.eq,
                loss_physchem: report.physchem,
                val_loss: None,
                mlm_accuracy: ratio(report.mlm_correct, report.mlm_count),
                eq_accuracy: ratio(report.eq_correct, report.eq_count),
            };
            if step % cfg.log_every == 0 {
                info!("step {step} epoch {epoch} loss {:.5}", report.total);
                metrics.push(row.clone());
                last = None;
            } else {
                last = Some(row);
            }
            if let (Some(every), Some(cb)) = (cfg.checkpoint_interval, on_checkpoint.as_deref_mut()) {
                if step % every == 0 {
                    cb(step, &params, &prepared.normalizer).map_err(TrainError::Checkpoint)?;
                }
            }
        }
        if !val.is_empty() {
            let v = validation_loss(&params, model_cfg, cfg, &prepared, &val)?;
            info!("epoch {epoch} validation loss {v:.5}");
            match (last.take(), metrics.last_mut()) {
                (Some(mut row), _) => {
                    row.val_loss = Some(v);
                    metrics.push(row);
                }
                (None, Some(row)) if row.epoch == epoch => row.val_loss = Some(v),
                _ => {}
            }
        }
    }
    if step == 0 && overflow > 0 {
        // every anchor was too long for the model
        return Err(TrainError::EmptyCorpus {
            skipped: prepared.skipped.len() + overflow,
        });
    }
    if let Some(cb) = on_checkpoint.as_deref_mut() {
        cb(step, &params, &prepared.normalizer).map_err(TrainError::Checkpoint)?;
    }
    Ok(PretrainOutcome {
        params,
        normalizer: prepared.normalizer.clone(),
        metrics,
        steps: step,
        skipped_parse: prepared.skipped.len(),
        skipped_overflow: overflow,
        train_size: train.len(),
        validation_size: val.len(),
    })
}

const VALIDATION_SEED: u64 = 0x5eed_0f_7a1d;

fn validation_loss(
    params: &Params<f32>,
    model_cfg: &ModelConfig,
    cfg: &PretrainConfig,
    prepared: &PreparedCorpus,
    val: &[usize],
) -> Result<f64, TrainError> {
    // negatives come from the validation molecules themselves when possible
    let all: Vec<usize> = (0..prepared.molecules.len()).collect();
    let builder = ExampleBuilder::new(cfg, prepared, &all, model_cfg.max_len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ VALIDATION_SEED);
    let mut sum = 0.0;
    let mut n = 0usize;
    for chunk in val.chunks(cfg.batch_size) {
        let (seqs, targets, _) = builder.build_batch(chunk, &mut rng)?;
        if seqs.is_empty() {
            continue;
        }
        let r = evaluate_losses(params, model_cfg, &seqs, cfg.tasks, &targets)?;
        sum += r.total * seqs.len() as f64;
        n += seqs.len();
    }
    Ok(if n == 0 { f64::NAN } else { sum / n as f64 })
}

/// Task metrics on freshly built examples.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TaskAccuracy {
    pub masked_lm: Option<f64>,
    pub smiles_eq: Option<f64>,
    pub physchem_mse: Option<f64>,
}

/// Builds `passes` rounds of examples over `indices` and measures masked
/// token accuracy, SMILES-Eq accuracy and descriptor MSE.
pub fn evaluate_tasks(
    params: &Params<f32>,
    model_cfg: &ModelConfig,
    cfg: &PretrainConfig,
    prepared: &PreparedCorpus,
    indices: &[usize],
    passes: usize,
    seed: u64,
) -> Result<TaskAccuracy, TrainError> {
    let builder = ExampleBuilder::new(cfg, prepared, indices, model_cfg.max_len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mc, mut mn, mut ec, mut en) = (0, 0, 0, 0);
    let (mut pc, mut pn) = (0.0, 0usize);
    for _ in 0..passes {
        for chunk in indices.chunks(cfg.batch_size) {
            let (seqs, targets, _) = builder.build_batch(chunk, &mut rng)?;
            if seqs.is_empty() {
                continue;
            }
            let r = evaluate_losses(params, model_cfg, &seqs, cfg.tasks, &targets)?;
            mc += r.mlm_correct;
            mn += r.mlm_count;
            ec += r.eq_correct;
            en += r.eq_count;
            if let Some(p) = r.physchem {
                pc += p * seqs.len() as f64;
                pn += seqs.len();
            }
        }
    }
    Ok(TaskAccuracy {
        masked_lm: ratio(mc, mn),
        smiles_eq: ratio(ec, en),
        physchem_mse: (pn > 0).then(|| pc / pn as f64),
    })
}
