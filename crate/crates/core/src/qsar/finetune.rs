use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Fold, QsarDataset, QsarError, TaskType};
use crate::model::{backward, forward, forward_with_cache, ModelConfig, Params, Real};
use crate::tokenizer::{TokenSequence, Tokenizer};
use crate::training::{adam_step, adam_update, AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// Train only the new head.
    pub freeze_encoder: bool,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            adam: AdamConfig::default(),
            epochs: 20,
            batch_size: 16,
            freeze_encoder: false,
            seed: 0,
        }
    }
}

/// Single output unit on the pooled embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHead<F> {
    pub w: Array1<F>,
    pub b: F,
}

impl<F: Real> LinearHead<F> {
    pub fn init(d: usize, seed: u64) -> LinearHead<F> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = 0.02 * 3f64.sqrt();
        LinearHead {
            w: Array1::from_shape_simple_fn(d, || F::c(rng.gen_range(-a..a))),
            b: F::zero(),
        }
    }

    pub fn apply(&self, pooled: &Array2<F>) -> Array1<F> {
        pooled.dot(&self.w) + self.b
    }
}

#[derive(Debug, Clone)]
pub struct FinetuneResult<F> {
    pub params: Params<F>,
    pub head: LinearHead<F>,
    /// Epoch whose weights were kept; 0 means the untrained starting point.
    pub best_epoch: usize,
    /// Validation loss before training and after each epoch.
    pub val_losses: Vec<f64>,
    pub train_losses: Vec<f64>,
}

impl<F: Real> FinetuneResult<F> {
    /// Decision values (classification logits) or predicted values.
    pub fn predict(&self, cfg: &ModelConfig, smiles: &[String]) -> Vec<f64> {
        let tok = Tokenizer::default();
        let seqs: Vec<TokenSequence> = smiles.iter().map(|s| tok.encode_single_unbounded(s)).collect();
        let mut out = Vec::with_capacity(seqs.len());
        for chunk in seqs.chunks(32) {
            let pooled = forward(&self.params, cfg, chunk).pooled;
            out.extend(self.head.apply(&pooled).iter().map(|v| v.to_f64().unwrap()));
        }
        out
    }
}

/// Loss and its gradient with respect to the head outputs.
pub(crate) fn head_loss<F: Real>(task: TaskType, z: &Array1<F>, y: &[f64]) -> (f64, Array1<F>) {
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut dz = Array1::zeros(z.len());
    for i in 0..y.len() {
        let zi = z[i].to_f64().unwrap();
        let (l, g) = match task {
            TaskType::Regression => ((zi - y[i]).powi(2), 2.0 * (zi - y[i])),
            TaskType::Classification => {
                // softplus(z) - y z, computed stably
                let sp = zi.max(0.0) + (-zi.abs()).exp().ln_1p();
                (sp - y[i] * zi, 1.0 / (1.0 + (-zi).exp()) - y[i])
            }
        };
        loss += l;
        dz[i] = F::c(g / n);
    }
    (loss / n, dz)
}

fn encode(tok: &Tokenizer, ds: &QsarDataset, idx: &[usize]) -> Vec<TokenSequence> {
    idx.iter().map(|&i| tok.encode_single_unbounded(&ds.smiles[i])).collect()
}

fn mean_loss<F: Real>(
    params: &Params<F>,
    head: &LinearHead<F>,
    cfg: &ModelConfig,
    task: TaskType,
    seqs: &[TokenSequence],
    y: &[f64],
) -> f64 {
    let mut total = 0.0;
    for (s, t) in seqs.chunks(32).zip(y.chunks(32)) {
        let pooled = forward(params, cfg, s).pooled;
        total += head_loss(task, &head.apply(&pooled), t).0 * t.len() as f64;
    }
    total / y.len() as f64
}

/// Trains a fresh linear head (and the encoder unless frozen) on the fold's
/// training split and keeps the epoch with the lowest validation loss.
pub fn finetune<F: Real>(
    params: &Params<F>,
    cfg: &ModelConfig,
    dataset: &QsarDataset,
    fold: &Fold,
    task: TaskType,
    ft: &FinetuneConfig,
) -> Result<FinetuneResult<F>, QsarError> {
    if fold.train.is_empty() {
        return Err(QsarError::EmptyFold("training"));
    }
    if fold.validation.is_empty() {
        return Err(QsarError::EmptyFold("validation"));
    }
    let tok = Tokenizer::default();
    let val_seqs = encode(&tok, dataset, &fold.validation);
    let val_y: Vec<f64> = fold.validation.iter().map(|&i| dataset.labels[i]).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(ft.seed);
    let mut params = params.clone();
    let mut head = LinearHead::init(cfg.hidden, rng.next_u64());
    let mut enc_state = AdamState::new(&params);
    let (mut mw, mut vw) = (Array1::zeros(cfg.hidden), Array1::zeros(cfg.hidden));
    let (mut mb, mut vb) = ([F::zero()], [F::zero()]);
    let mut head_t = 0u64;

    let mut best = (mean_loss(&params, &head, cfg, task, &val_seqs, &val_y), 0usize);
    let mut best_state = (params.clone(), head.clone());
    let mut result = FinetuneResult {
        params: params.clone(),
        head: head.clone(),
        best_epoch: 0,
        val_losses: vec![best.0],
        train_losses: Vec::new(),
    };
    for epoch in 1..=ft.epochs {
        let mut order = fold.train.clone();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(ft.batch_size.max(1)) {
            let seqs = encode(&tok, dataset, chunk);
            let y: Vec<f64> = chunk.iter().map(|&i| dataset.labels[i]).collect();
            let drop_rng: Option<&mut dyn RngCore> = if cfg.dropout > 0.0 { Some(&mut rng) } else { None };
            let cache = forward_with_cache(&params, cfg, &seqs, drop_rng);
            let pooled = &cache.output.pooled;
            let (loss, dz) = head_loss(task, &head.apply(pooled), &y);
            if !loss.is_finite() {
                return Err(QsarError::NonFinite(format!("fine-tuning loss at epoch {epoch}")));
            }
            epoch_loss += loss * y.len() as f64;
            let gw = pooled.t().dot(&dz);
            let gb = [dz.sum()];
            if !ft.freeze_encoder {
                let d_pooled = dz.view().insert_axis(Axis(1)).dot(&head.w.view().insert_axis(Axis(0)));
                let mut grads = params.zeros_like();
                backward(&params, cfg, &cache, None, Some(&d_pooled), &mut grads);
                adam_step(&mut params, &grads, &mut enc_state, &ft.adam);
            }
            head_t += 1;
            adam_update(
                head.w.as_slice_mut().unwrap(),
                gw.as_slice().unwrap(),
                mw.as_slice_mut().unwrap(),
                vw.as_slice_mut().unwrap(),
                head_t,
                &ft.adam,
            );
            let mut hb = [head.b];
            adam_update(&mut hb, &gb, &mut mb, &mut vb, head_t, &ft.adam);
            head.b = hb[0];
        }
        result.train_losses.push(epoch_loss / fold.train.len() as f64);
        let v = mean_loss(&params, &head, cfg, task, &val_seqs, &val_y);
        result.val_losses.push(v);
        if v < best.0 {
            best = (v, epoch);
            best_state = (params.clone(), head.clone());
        }
    }
    result.best_epoch = best.1;
    (result.params, result.head) = best_state;
    Ok(result)
}
