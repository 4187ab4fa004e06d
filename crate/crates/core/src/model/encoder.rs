use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, RngCore};

use super::{ModelConfig, Params, Real};
use crate::tokenizer::TokenSequence;

const LN_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EncoderOutput<F> {
    /// Hidden states of all sequences stacked row-wise.
    pub sequence: Array2<F>,
    /// Row offset of each sequence in `sequence`; one extra trailing entry.
    pub offsets: Vec<usize>,
    /// `B × d`, tanh of the pooler applied to each position-0 state.
    pub pooled: Array2<F>,
}

impl<F: Real> EncoderOutput<F> {
    pub fn batch_size(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn sequence_of(&self, b: usize) -> ArrayView2<'_, F> {
        self.sequence.slice(s![self.offsets[b]..self.offsets[b + 1], ..])
    }
}

struct LnCache<F> {
    xhat: Array2<F>,
    inv_std: Array1<F>,
}

struct LayerCache<F> {
    x_in: Array2<F>,
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    /// Attention probabilities per sequence, per head.
    probs: Vec<Vec<Array2<F>>>,
    ctx: Array2<F>,
    drop_attn: Option<Array2<F>>,
    ln1: LnCache<F>,
    h1: Array2<F>,
    ff_pre: Array2<F>,
    ff_act: Array2<F>,
    drop_ff: Option<Array2<F>>,
    ln2: LnCache<F>,
}

/// Everything the reverse pass needs.
pub struct EncoderCache<F> {
    ids: Vec<u32>,
    segs: Vec<u8>,
    emb_ln: LnCache<F>,
    drop_emb: Option<Array2<F>>,
    layers: Vec<LayerCache<F>>,
    cls: Array2<F>,
    pub output: EncoderOutput<F>,
}

fn layer_norm<F: Real>(x: &Array2<F>, g: &Array1<F>, b: &Array1<F>) -> (Array2<F>, LnCache<F>) {
    let d = F::c(x.ncols() as f64);
    let eps = F::c(LN_EPS);
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, istd) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|&v| v * v).sum::<F>() / d;
        *istd = F::one() / (var + eps).sqrt();
        let k = *istd;
        row.mapv_inplace(|v| v * k);
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

/// Returns dx; accumulates into dg, db.
fn layer_norm_back<F: Real>(
    dy: &Array2<F>,
    c: &LnCache<F>,
    g: &Array1<F>,
    dg: &mut Array1<F>,
    db: &mut Array1<F>,
) -> Array2<F> {
    *dg += &(dy * &c.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let d = F::c(dy.ncols() as f64);
    let mut dx = dy * g;
    for ((mut row, xh), &istd) in dx.rows_mut().into_iter().zip(c.xhat.rows()).zip(&c.inv_std) {
        let mean_d = row.sum() / d;
        let mean_dx = row.iter().zip(xh).map(|(&a, &b)| a * b).sum::<F>() / d;
        Zip::from(&mut row)
            .and(&xh)
            .for_each(|r, &xv| *r = (*r - mean_d - xv * mean_dx) * istd);
    }
    dx
}

const GELU_A: f64 = 0.044715;

fn gelu<F: Real>(x: F) -> F {
    let c = F::c((2.0 / std::f64::consts::PI).sqrt());
    let t = (c * (x + F::c(GELU_A) * x * x * x)).tanh();
    F::c(0.5) * x * (F::one() + t)
}

fn gelu_grad<F: Real>(x: F) -> F {
    let c = F::c((2.0 / std::f64::consts::PI).sqrt());
    let a = F::c(GELU_A);
    let t = (c * (x + a * x * x * x)).tanh();
    let half = F::c(0.5);
    half * (F::one() + t) + half * x * (F::one() - t * t) * c * (F::one() + F::c(3.0) * a * x * x)
}

fn dropout_mask<F: Real>(rows: usize, cols: usize, p: f64, rng: &mut dyn RngCore) -> Array2<F> {
    let keep = F::c(1.0 / (1.0 - p));
    Array2::from_shape_simple_fn((rows, cols), || if rng.gen::<f64>() < p { F::zero() } else { keep })
}

fn linear<F: Real>(x: &Array2<F>, w: &Array2<F>, b: &Array1<F>) -> Array2<F> {
    x.dot(w) + b
}

/// Index into the relative table for offset `j - i`.
fn rel_index(offset: isize, k: usize) -> usize {
    (offset.clamp(-(k as isize), k as isize) + k as isize) as usize
}

fn pack(batch: &[TokenSequence]) -> (Vec<u32>, Vec<u8>, Vec<bool>, Vec<usize>) {
    let mut ids = Vec::new();
    let mut segs = Vec::new();
    let mut mask = Vec::new();
    let mut offsets = vec![0];
    for s in batch {
        ids.extend_from_slice(&s.ids);
        segs.extend_from_slice(&s.segment_ids);
        mask.extend(s.attention_mask.iter().map(|&m| m != 0));
        offsets.push(ids.len());
    }
    (ids, segs, mask, offsets)
}

/// Inference forward pass (dropout off).
pub fn forward<F: Real>(params: &Params<F>, cfg: &ModelConfig, batch: &[TokenSequence]) -> EncoderOutput<F> {
    forward_with_cache(params, cfg, batch, None).output
}

/// Forward pass keeping intermediates. Dropout is applied only when `rng`
/// is given and the configured rate is positive.
pub fn forward_with_cache<F: Real>(
    params: &Params<F>,
    cfg: &ModelConfig,
    batch: &[TokenSequence],
    mut rng: Option<&mut dyn RngCore>,
) -> EncoderCache<F> {
    let (ids, segs, key_mask, offsets) = pack(batch);
    let d = cfg.hidden;
    let n_rows = ids.len();
    let p = cfg.dropout;
    let mut drop = |rows: usize, cols: usize| -> Option<Array2<F>> {
        match rng.as_deref_mut() {
            Some(r) if p > 0.0 => Some(dropout_mask(rows, cols, p, r)),
            _ => None,
        }
    };

    let mut x = Array2::<F>::zeros((n_rows, d));
    for (r, mut row) in x.rows_mut().into_iter().enumerate() {
        row.assign(&params.tok_emb.row(ids[r] as usize));
        row += &params.seg_emb.row(segs[r] as usize);
    }
    let (mut x, emb_ln) = layer_norm(&x, &params.emb_ln_g, &params.emb_ln_b);
    let drop_emb = drop(n_rows, d);
    if let Some(m) = &drop_emb {
        x *= m;
    }

    let heads = cfg.heads;
    let dh = cfg.head_dim();
    let kmax = cfg.max_rel_distance;
    let scale = F::c(1.0 / (dh as f64).sqrt());
    let mut layers = Vec::with_capacity(params.layers.len());
    for lp in &params.layers {
        let q = linear(&x, &lp.wq, &lp.bq);
        let k = linear(&x, &lp.wk, &lp.bk);
        let v = linear(&x, &lp.wv, &lp.bv);
        let mut ctx = Array2::<F>::zeros((n_rows, d));
        let mut probs = Vec::with_capacity(batch.len());
        for w in offsets.windows(2) {
            let (o, n) = (w[0], w[1] - w[0]);
            let mut per_head = Vec::with_capacity(heads);
            if n == 0 {
                probs.push(per_head);
                continue;
            }
            let lo = rel_index(-(n as isize - 1), kmax);
            let hi = rel_index(n as isize - 1, kmax);
            let rsub = lp.rel.slice(s![lo..=hi, ..]);
            for h in 0..heads {
                let cols = h * dh..(h + 1) * dh;
                let qh = q.slice(s![o..o + n, cols.clone()]);
                let kh = k.slice(s![o..o + n, cols.clone()]);
                let vh = v.slice(s![o..o + n, cols.clone()]);
                let qu = &qh + &lp.u.row(h);
                let qv = &qh + &lp.v.row(h);
                let mut z = qu.dot(&kh.t());
                let pos = qv.dot(&rsub.t());
                for i in 0..n {
                    let mut row = z.row_mut(i);
                    let mut max = F::neg_infinity();
                    for j in 0..n {
                        if key_mask[o + j] {
                            let rj = rel_index(j as isize - i as isize, kmax) - lo;
                            let val = (row[j] + pos[[i, rj]]) * scale;
                            row[j] = val;
                            if val > max {
                                max = val;
                            }
                        }
                    }
                    let mut sum = F::zero();
                    for j in 0..n {
                        if key_mask[o + j] {
                            let e = (row[j] - max).exp();
                            row[j] = e;
                            sum += e;
                        } else {
                            row[j] = F::zero();
                        }
                    }
                    if sum > F::zero() {
                        row.mapv_inplace(|e| e / sum);
                    }
                }
                ctx.slice_mut(s![o..o + n, cols]).assign(&z.dot(&vh));
                per_head.push(z);
            }
            probs.push(per_head);
        }
        let mut attn = linear(&ctx, &lp.wo, &lp.bo);
        let drop_attn = drop(n_rows, d);
        if let Some(m) = &drop_attn {
            attn *= m;
        }
        let (h1, ln1) = layer_norm(&(&x + &attn), &lp.ln1_g, &lp.ln1_b);
        let ff_pre = linear(&h1, &lp.w1, &lp.b1);
        let ff_act = ff_pre.mapv(gelu);
        let mut ff = linear(&ff_act, &lp.w2, &lp.b2);
        let drop_ff = drop(n_rows, d);
        if let Some(m) = &drop_ff {
            ff *= m;
        }
        let (x_out, ln2) = layer_norm(&(&h1 + &ff), &lp.ln2_g, &lp.ln2_b);
        layers.push(LayerCache {
            x_in: std::mem::replace(&mut x, x_out),
            q,
            k,
            v,
            probs,
            ctx,
            drop_attn,
            ln1,
            h1,
            ff_pre,
            ff_act,
            drop_ff,
            ln2,
        });
    }

    let b = batch.len();
    let mut cls = Array2::<F>::zeros((b, d));
    for (i, mut row) in cls.rows_mut().into_iter().enumerate() {
        if offsets[i + 1] > offsets[i] {
            row.assign(&x.row(offsets[i]));
        }
    }
    let pooled = linear(&cls, &params.pool_w, &params.pool_b).mapv(|t| t.tanh());
    EncoderCache {
        ids,
        segs,
        emb_ln,
        drop_emb,
        layers,
        cls,
        output: EncoderOutput {
            sequence: x,
            offsets,
            pooled,
        },
    }
}

fn linear_back<F: Real>(
    x: &Array2<F>,
    w: &Array2<F>,
    dy: &Array2<F>,
    dw: &mut Array2<F>,
    db: &mut Array1<F>,
) -> Array2<F> {
    *dw += &x.t().dot(dy);
    *db += &dy.sum_axis(Axis(0));
    dy.dot(&w.t())
}

/// Reverse pass from gradients w.r.t. the sequence output and the pooled
/// output; accumulates into `grads`.
pub(crate) fn backward<F: Real>(
    params: &Params<F>,
    cfg: &ModelConfig,
    cache: &EncoderCache<F>,
    d_sequence: Option<&Array2<F>>,
    d_pooled: Option<&Array2<F>>,
    grads: &mut Params<F>,
) {
    let out = &cache.output;
    let offsets = &out.offsets;
    let d = cfg.hidden;
    let n_rows = out.sequence.nrows();
    let mut dx = match d_sequence {
        Some(g) => g.clone(),
        None => Array2::zeros((n_rows, d)),
    };
    if let Some(dp) = d_pooled {
        let dpre = dp * &out.pooled.mapv(|t| F::one() - t * t);
        let dcls = linear_back(&cache.cls, &params.pool_w, &dpre, &mut grads.pool_w, &mut grads.pool_b);
        for (i, row) in dcls.rows().into_iter().enumerate() {
            if offsets[i + 1] > offsets[i] {
                let mut r = dx.row_mut(offsets[i]);
                r += &row;
            }
        }
    }

    let heads = cfg.heads;
    let dh = cfg.head_dim();
    let kmax = cfg.max_rel_distance;
    let scale = F::c(1.0 / (dh as f64).sqrt());
    for (li, lc) in cache.layers.iter().enumerate().rev() {
        let lp = &params.layers[li];
        let lg = &mut grads.layers[li];
        let dsum2 = layer_norm_back(&dx, &lc.ln2, &lp.ln2_g, &mut lg.ln2_g, &mut lg.ln2_b);
        let mut dff = dsum2.clone();
        if let Some(m) = &lc.drop_ff {
            dff *= m;
        }
        let mut dh1 = dsum2;
        let dact = linear_back(&lc.ff_act, &lp.w2, &dff, &mut lg.w2, &mut lg.b2);
        let dpre = dact * &lc.ff_pre.mapv(gelu_grad);
        dh1 += &linear_back(&lc.h1, &lp.w1, &dpre, &mut lg.w1, &mut lg.b1);
        let dsum1 = layer_norm_back(&dh1, &lc.ln1, &lp.ln1_g, &mut lg.ln1_g, &mut lg.ln1_b);
        let mut dattn = dsum1.clone();
        if let Some(m) = &lc.drop_attn {
            dattn *= m;
        }
        let mut dx_in = dsum1;
        let dctx = linear_back(&lc.ctx, &lp.wo, &dattn, &mut lg.wo, &mut lg.bo);

        let mut dq = Array2::<F>::zeros((n_rows, d));
        let mut dk = Array2::<F>::zeros((n_rows, d));
        let mut dv = Array2::<F>::zeros((n_rows, d));
        for (si, w) in offsets.windows(2).enumerate() {
            let (o, n) = (w[0], w[1] - w[0]);
            if n == 0 {
                continue;
            }
            let lo = rel_index(-(n as isize - 1), kmax);
            let hi = rel_index(n as isize - 1, kmax);
            let rsub = lp.rel.slice(s![lo..=hi, ..]);
            let mut drel_sub = Array2::<F>::zeros(rsub.raw_dim());
            for h in 0..heads {
                let cols = h * dh..(h + 1) * dh;
                let probs = &lc.probs[si][h];
                let qh = lc.q.slice(s![o..o + n, cols.clone()]);
                let kh = lc.k.slice(s![o..o + n, cols.clone()]);
                let vh = lc.v.slice(s![o..o + n, cols.clone()]);
                let dctx_h = dctx.slice(s![o..o + n, cols.clone()]);
                let ds = dctx_h.dot(&vh.t());
                dv.slice_mut(s![o..o + n, cols.clone()]).assign(&probs.t().dot(&dctx_h));
                let mut dz = Array2::<F>::zeros((n, n));
                let mut dpos = Array2::<F>::zeros((n, hi - lo + 1));
                for i in 0..n {
                    let pr = probs.row(i);
                    let dr = ds.row(i);
                    let dot: F = pr.iter().zip(dr).map(|(&a, &b)| a * b).sum();
                    for j in 0..n {
                        let g = pr[j] * (dr[j] - dot) * scale;
                        if g != F::zero() {
                            dz[[i, j]] = g;
                            let rj = rel_index(j as isize - i as isize, kmax) - lo;
                            dpos[[i, rj]] += g;
                        }
                    }
                }
                let qu = &qh + &lp.u.row(h);
                let qv = &qh + &lp.v.row(h);
                let dqu = dz.dot(&kh);
                let dqv = dpos.dot(&rsub);
                dk.slice_mut(s![o..o + n, cols.clone()]).assign(&dz.t().dot(&qu));
                drel_sub += &dpos.t().dot(&qv);
                {
                    let mut gu = lg.u.row_mut(h);
                    gu += &dqu.sum_axis(Axis(0));
                }
                {
                    let mut gv = lg.v.row_mut(h);
                    gv += &dqv.sum_axis(Axis(0));
                }
                dq.slice_mut(s![o..o + n, cols]).assign(&(dqu + dqv));
            }
            let mut target = lg.rel.slice_mut(s![lo..=hi, ..]);
            target += &drel_sub;
        }
        dx_in += &linear_back(&lc.x_in, &lp.wq, &dq, &mut lg.wq, &mut lg.bq);
        dx_in += &linear_back(&lc.x_in, &lp.wk, &dk, &mut lg.wk, &mut lg.bk);
        dx_in += &linear_back(&lc.x_in, &lp.wv, &dv, &mut lg.wv, &mut lg.bv);
        dx = dx_in;
    }

    if let Some(m) = &cache.drop_emb {
        dx *= m;
    }
    let demb = layer_norm_back(&dx, &cache.emb_ln, &params.emb_ln_g, &mut grads.emb_ln_g, &mut grads.emb_ln_b);
    for (r, row) in demb.rows().into_iter().enumerate() {
        let mut t = grads.tok_emb.row_mut(cache.ids[r] as usize);
        t += &row;
        let mut sg = grads.seg_emb.row_mut(cache.segs[r] as usize);
        sg += &row;
    }
}
