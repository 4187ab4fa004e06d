use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::encoder::{backward, forward_with_cache};
use super::{EncoderOutput, ModelConfig, ModelError, Params, Real};
use crate::tokenizer::TokenSequence;

/// Which pretraining losses are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSet {
    pub masked_lm: bool,
    pub smiles_eq: bool,
    pub physchem: bool,
}

impl TaskSet {
    pub const ALL: TaskSet = TaskSet {
        masked_lm: true,
        smiles_eq: true,
        physchem: true,
    };

    pub fn count(&self) -> usize {
        self.masked_lm as usize + self.smiles_eq as usize + self.physchem as usize
    }

    /// All seven non-empty combinations.
    pub fn combinations() -> Vec<TaskSet> {
        (1..8u8)
            .map(|m| TaskSet {
                masked_lm: m & 1 != 0,
                smiles_eq: m & 2 != 0,
                physchem: m & 4 != 0,
            })
            .collect()
    }
}

/// One masked position: sequence index in the batch, position, original id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MaskedTarget {
    pub seq: usize,
    pub pos: usize,
    pub label: u32,
}

#[derive(Debug, Clone, Default)]
pub struct Targets<F> {
    pub masked: Vec<MaskedTarget>,
    /// One {0,1} label per sequence.
    pub eq_labels: Vec<u8>,
    /// `B × D` descriptor targets.
    pub physchem: Option<Array2<F>>,
}

/// Per-task losses and accuracy counts for one batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossReport {
    pub total: f64,
    pub mlm: Option<f64>,
    pub eq: Option<f64>,
    pub physchem: Option<f64>,
    pub mlm_correct: usize,
    pub mlm_count: usize,
    pub eq_correct: usize,
    pub eq_count: usize,
}

impl LossReport {
    pub fn task_losses(&self) -> Vec<f64> {
        [self.mlm, self.eq, self.physchem].into_iter().flatten().collect()
    }
}

/// Arithmetic mean of the task losses.
pub fn total_loss(losses: &[f64]) -> Result<f64, ModelError> {
    if losses.is_empty() {
        return Err(ModelError::EmptyTask("task loss"));
    }
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

fn log_softmax<F: Real>(logits: ArrayView1<F>) -> Array1<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let lse = logits.iter().map(|&x| (x - max).exp()).sum::<F>().ln() + max;
    logits.mapv(|x| x - lse)
}

/// Cross-entropy of one logit vector against an integer label.
pub fn cross_entropy<F: Real>(logits: ArrayView1<F>, label: usize) -> F {
    -log_softmax(logits)[label]
}

fn argmax<F: Real>(v: ArrayView1<F>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn gather_rows<F: Real>(out: &EncoderOutput<F>, masked: &[MaskedTarget]) -> Array2<F> {
    let d = out.sequence.ncols();
    let mut h = Array2::zeros((masked.len(), d));
    for (r, t) in masked.iter().enumerate() {
        h.row_mut(r).assign(&out.sequence.row(out.offsets[t.seq] + t.pos));
    }
    h
}

fn mlm_logits<F: Real>(params: &Params<F>, h: &Array2<F>) -> Array2<F> {
    h.dot(&params.mlm_projection().t()) + &params.mlm_b
}

/// Mean cross-entropy over the masked positions.
pub fn masked_lm_loss<F: Real>(
    params: &Params<F>,
    out: &EncoderOutput<F>,
    masked: &[MaskedTarget],
) -> Result<F, ModelError> {
    if masked.is_empty() {
        return Err(ModelError::EmptyTask("masked position"));
    }
    let logits = mlm_logits(params, &gather_rows(out, masked));
    let sum: F = masked
        .iter()
        .zip(logits.rows())
        .map(|(t, l)| cross_entropy(l, t.label as usize))
        .sum();
    Ok(sum / F::c(masked.len() as f64))
}

/// Mean two-class cross-entropy of the equivalence head.
pub fn smiles_eq_loss<F: Real>(params: &Params<F>, pooled: ArrayView2<F>, labels: &[u8]) -> Result<F, ModelError> {
    if labels.is_empty() || labels.len() != pooled.nrows() {
        return Err(ModelError::Shape(format!("{} labels for {} rows", labels.len(), pooled.nrows())));
    }
    let logits = pooled.dot(&params.eq_w) + &params.eq_b;
    let sum: F = logits
        .rows()
        .into_iter()
        .zip(labels)
        .map(|(l, &y)| cross_entropy(l, y as usize))
        .sum();
    Ok(sum / F::c(labels.len() as f64))
}

/// Mean squared error over all rows and descriptors.
pub fn physchem_loss<F: Real>(params: &Params<F>, pooled: ArrayView2<F>, target: &Array2<F>) -> Result<F, ModelError> {
    let pred = pooled.dot(&params.pc_w) + &params.pc_b;
    if pred.dim() != target.dim() || target.is_empty() {
        return Err(ModelError::Shape(format!("prediction {:?} vs target {:?}", pred.dim(), target.dim())));
    }
    let diff = pred - target;
    Ok(diff.mapv(|x| x * x).sum() / F::c(target.len() as f64))
}

fn softmax_ce_grad<F: Real>(logits: &Array2<F>, labels: impl Iterator<Item = usize>, scale: F) -> (F, Array2<F>, usize) {
    let mut g = Array2::zeros(logits.raw_dim());
    let mut loss = F::zero();
    let mut correct = 0;
    for ((row, mut grow), y) in logits.rows().into_iter().zip(g.rows_mut()).zip(labels) {
        let ls = log_softmax(row);
        loss += -ls[y];
        if argmax(row) == y {
            correct += 1;
        }
        for (k, gv) in grow.iter_mut().enumerate() {
            let p = ls[k].exp();
            *gv = (p - if k == y { F::one() } else { F::zero() }) * scale;
        }
    }
    (loss, g, correct)
}

/// Forward, active-task losses, their mean, and gradients of that mean for
/// every tensor. Inactive heads receive exactly zero gradient.
pub fn loss_and_grad<F: Real>(
    params: &Params<F>,
    cfg: &ModelConfig,
    batch: &[TokenSequence],
    tasks: TaskSet,
    targets: &Targets<F>,
    rng: Option<&mut dyn RngCore>,
) -> Result<(LossReport, Params<F>), ModelError> {
    run(params, cfg, batch, tasks, targets, rng, true)
}

/// Losses only (no reverse pass, no dropout).
pub fn evaluate_losses<F: Real>(
    params: &Params<F>,
    cfg: &ModelConfig,
    batch: &[TokenSequence],
    tasks: TaskSet,
    targets: &Targets<F>,
) -> Result<LossReport, ModelError> {
    run(params, cfg, batch, tasks, targets, None, false).map(|r| r.0)
}

fn run<F: Real>(
    params: &Params<F>,
    cfg: &ModelConfig,
    batch: &[TokenSequence],
    tasks: TaskSet,
    targets: &Targets<F>,
    rng: Option<&mut dyn RngCore>,
    want_grad: bool,
) -> Result<(LossReport, Params<F>), ModelError> {
    let n_active = tasks.count();
    if n_active == 0 {
        return Err(ModelError::EmptyTask("active task"));
    }
    let b = batch.len();
    if b == 0 {
        return Err(ModelError::EmptyTask("sequence"));
    }
    let cache = forward_with_cache(params, cfg, batch, rng);
    let out = &cache.output;
    let mut grads = params.zeros_like();
    let mut report = LossReport::default();
    let share = F::one() / F::c(n_active as f64);
    let d = cfg.hidden;
    let mut d_seq: Option<Array2<F>> = None;
    let mut d_pooled = Array2::<F>::zeros((b, d));

    if tasks.masked_lm {
        let m = targets.masked.len();
        if m == 0 {
            return Err(ModelError::EmptyTask("masked position"));
        }
        let h = gather_rows(out, &targets.masked);
        let logits = mlm_logits(params, &h);
        let scale = share / F::c(m as f64);
        let (loss, dlogits, correct) =
            softmax_ce_grad(&logits, targets.masked.iter().map(|t| t.label as usize), scale);
        report.mlm = Some((loss / F::c(m as f64)).to_f64().unwrap());
        report.mlm_correct = correct;
        report.mlm_count = m;
        grads.mlm_b += &dlogits.sum_axis(Axis(0));
        let dw = dlogits.t().dot(&h);
        match grads.mlm_w.as_mut() {
            Some(w) => *w += &dw,
            None => grads.tok_emb += &dw,
        }
        let dh = dlogits.dot(params.mlm_projection());
        let mut ds = Array2::zeros(out.sequence.raw_dim());
        for (t, row) in targets.masked.iter().zip(dh.rows()) {
            let mut r = ds.row_mut(out.offsets[t.seq] + t.pos);
            r += &row;
        }
        d_seq = Some(ds);
    }

    if tasks.smiles_eq {
        if targets.eq_labels.len() != b {
            return Err(ModelError::Shape(format!("{} eq labels for {b} sequences", targets.eq_labels.len())));
        }
        let logits = out.pooled.dot(&params.eq_w) + &params.eq_b;
        let scale = share / F::c(b as f64);
        let (loss, dlogits, correct) =
            softmax_ce_grad(&logits, targets.eq_labels.iter().map(|&y| y as usize), scale);
        report.eq = Some((loss / F::c(b as f64)).to_f64().unwrap());
        report.eq_correct = correct;
        report.eq_count = b;
        grads.eq_w += &out.pooled.t().dot(&dlogits);
        grads.eq_b += &dlogits.sum_axis(Axis(0));
        d_pooled += &dlogits.dot(&params.eq_w.t());
    }

    if tasks.physchem {
        let target = targets
            .physchem
            .as_ref()
            .ok_or(ModelError::EmptyTask("descriptor target"))?;
        let pred = out.pooled.dot(&params.pc_w) + &params.pc_b;
        if pred.dim() != target.dim() {
            return Err(ModelError::Shape(format!("prediction {:?} vs target {:?}", pred.dim(), target.dim())));
        }
        let diff = pred - target;
        let count = F::c(target.len() as f64);
        report.physchem = Some((diff.mapv(|x| x * x).sum() / count).to_f64().unwrap());
        let dpred = diff * (F::c(2.0) * share / count);
        grads.pc_w += &out.pooled.t().dot(&dpred);
        grads.pc_b += &dpred.sum_axis(Axis(0));
        d_pooled += &dpred.dot(&params.pc_w.t());
    }

    report.total = total_loss(&report.task_losses())?;
    if !want_grad {
        return Ok((report, grads));
    }
    let pooled_used = tasks.smiles_eq || tasks.physchem;
    backward(
        params,
        cfg,
        &cache,
        d_seq.as_ref(),
        pooled_used.then_some(&d_pooled),
        &mut grads,
    );
    Ok((report, grads))
}
