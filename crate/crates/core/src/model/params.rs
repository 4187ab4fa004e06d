use ndarray::{Array1, Array2, ArrayBase, Dimension, OwnedRepr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ModelConfig, Real};

/// Weights of one encoder layer. Projections are stored input-major
/// (`x · W`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<F> {
    pub wq: Array2<F>,
    pub bq: Array1<F>,
    pub wk: Array2<F>,
    pub bk: Array1<F>,
    pub wv: Array2<F>,
    pub bv: Array1<F>,
    pub wo: Array2<F>,
    pub bo: Array1<F>,
    /// Relative-position embeddings, `(2K+1) × d_head`, shared by all heads.
    pub rel: Array2<F>,
    /// Content bias per head, `H × d_head`.
    pub u: Array2<F>,
    /// Position bias per head, `H × d_head`.
    pub v: Array2<F>,
    pub ln1_g: Array1<F>,
    pub ln1_b: Array1<F>,
    pub w1: Array2<F>,
    pub b1: Array1<F>,
    pub w2: Array2<F>,
    pub b2: Array1<F>,
    pub ln2_g: Array1<F>,
    pub ln2_b: Array1<F>,
}

/// All learnable tensors. The same struct holds gradients and optimizer
/// moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Params<F> {
    pub tok_emb: Array2<F>,
    pub seg_emb: Array2<F>,
    pub emb_ln_g: Array1<F>,
    pub emb_ln_b: Array1<F>,
    pub layers: Vec<LayerParams<F>>,
    pub pool_w: Array2<F>,
    pub pool_b: Array1<F>,
    /// Untied masked-LM projection `V × d`; `None` when tied to `tok_emb`.
    pub mlm_w: Option<Array2<F>>,
    pub mlm_b: Array1<F>,
    pub eq_w: Array2<F>,
    pub eq_b: Array1<F>,
    pub pc_w: Array2<F>,
    pub pc_b: Array1<F>,
}

pub(crate) const INIT_SCALE: f64 = 0.02;

struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    // uniform with standard deviation INIT_SCALE
    fn mat<F: Real>(&mut self, r: usize, c: usize) -> Array2<F> {
        let a = INIT_SCALE * 3f64.sqrt();
        Array2::from_shape_simple_fn((r, c), || F::c(self.rng.gen_range(-a..a)))
    }
}

fn push<'a, F: Real, D: Dimension>(
    out: &mut Vec<(String, Vec<usize>, &'a [F])>,
    name: String,
    a: &'a ArrayBase<OwnedRepr<F>, D>,
) {
    out.push((name, a.shape().to_vec(), a.as_slice().expect("standard layout")));
}

fn push_mut<'a, F: Real, D: Dimension>(
    out: &mut Vec<(String, &'a mut [F])>,
    name: String,
    a: &'a mut ArrayBase<OwnedRepr<F>, D>,
) {
    out.push((name, a.as_slice_mut().expect("standard layout")));
}

macro_rules! visit_fields {
    ($self:ident, $out:ident, $push:ident, $($mutability:tt)*) => {{
        $push(&mut $out, "tok_emb".into(), & $($mutability)* $self.tok_emb);
        $push(&mut $out, "seg_emb".into(), & $($mutability)* $self.seg_emb);
        $push(&mut $out, "emb_ln_g".into(), & $($mutability)* $self.emb_ln_g);
        $push(&mut $out, "emb_ln_b".into(), & $($mutability)* $self.emb_ln_b);
        for (i, l) in (& $($mutability)* $self.layers).iter_mut_or_ref().enumerate() {
            $push(&mut $out, format!("layer{i}.wq"), & $($mutability)* l.wq);
            $push(&mut $out, format!("layer{i}.bq"), & $($mutability)* l.bq);
            $push(&mut $out, format!("layer{i}.wk"), & $($mutability)* l.wk);
            $push(&mut $out, format!("layer{i}.bk"), & $($mutability)* l.bk);
            $push(&mut $out, format!("layer{i}.wv"), & $($mutability)* l.wv);
            $push(&mut $out, format!("layer{i}.bv"), & $($mutability)* l.bv);
            $push(&mut $out, format!("layer{i}.wo"), & $($mutability)* l.wo);
            $push(&mut $out, format!("layer{i}.bo"), & $($mutability)* l.bo);
            $push(&mut $out, format!("layer{i}.rel"), & $($mutability)* l.rel);
            $push(&mut $out, format!("layer{i}.u"), & $($mutability)* l.u);
            $push(&mut $out, format!("layer{i}.v"), & $($mutability)* l.v);
            $push(&mut $out, format!("layer{i}.ln1_g"), & $($mutability)* l.ln1_g);
            $push(&mut $out, format!("layer{i}.ln1_b"), & $($mutability)* l.ln1_b);
            $push(&mut $out, format!("layer{i}.w1"), & $($mutability)* l.w1);
            $push(&mut $out, format!("layer{i}.b1"), & $($mutability)* l.b1);
            $push(&mut $out, format!("layer{i}.w2"), & $($mutability)* l.w2);
            $push(&mut $out, format!("layer{i}.b2"), & $($mutability)* l.b2);
            $push(&mut $out, format!("layer{i}.ln2_g"), & $($mutability)* l.ln2_g);
            $push(&mut $out, format!("layer{i}.ln2_b"), & $($mutability)* l.ln2_b);
        }
        $push(&mut $out, "pool_w".into(), & $($mutability)* $self.pool_w);
        $push(&mut $out, "pool_b".into(), & $($mutability)* $self.pool_b);
        if let Some(w) = (& $($mutability)* $self.mlm_w).as_mut_or_ref() {
            $push(&mut $out, "mlm_w".into(), w);
        }
        $push(&mut $out, "mlm_b".into(), & $($mutability)* $self.mlm_b);
        $push(&mut $out, "eq_w".into(), & $($mutability)* $self.eq_w);
        $push(&mut $out, "eq_b".into(), & $($mutability)* $self.eq_b);
        $push(&mut $out, "pc_w".into(), & $($mutability)* $self.pc_w);
        $push(&mut $out, "pc_b".into(), & $($mutability)* $self.pc_b);
    }};
}

// Small adapters so one macro body serves both the shared and the mutable
// walk.
trait IterEither<'a, T: 'a> {
    type It: Iterator;
    fn iter_mut_or_ref(self) -> Self::It;
}

impl<'a, T: 'a> IterEither<'a, T> for &'a Vec<T> {
    type It = std::slice::Iter<'a, T>;
    fn iter_mut_or_ref(self) -> Self::It {
        self.iter()
    }
}

impl<'a, T: 'a> IterEither<'a, T> for &'a mut Vec<T> {
    type It = std::slice::IterMut<'a, T>;
    fn iter_mut_or_ref(self) -> Self::It {
        self.iter_mut()
    }
}

trait OptEither<'a, T: 'a> {
    type Out;
    fn as_mut_or_ref(self) -> Option<Self::Out>;
}

impl<'a, T: 'a> OptEither<'a, T> for &'a Option<T> {
    type Out = &'a T;
    fn as_mut_or_ref(self) -> Option<&'a T> {
        self.as_ref()
    }
}

impl<'a, T: 'a> OptEither<'a, T> for &'a mut Option<T> {
    type Out = &'a mut T;
    fn as_mut_or_ref(self) -> Option<&'a mut T> {
        self.as_mut()
    }
}

impl<F: Real> Params<F> {
    /// Seeded initialization: small uniform weights, zero biases, unit
    /// layer-norm gains.
    pub fn init(cfg: &ModelConfig) -> Params<F> {
        let mut g = Init {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        };
        let (d, f, v, dh, h) = (cfg.hidden, cfg.ff, cfg.vocab_size, cfg.head_dim(), cfg.heads);
        let r = 2 * cfg.max_rel_distance + 1;
        let zeros = |n| Array1::<F>::zeros(n);
        let ones = |n| Array1::<F>::ones(n);
        let tok_emb = g.mat(v, d);
        let seg_emb = g.mat(2, d);
        let layers = (0..cfg.layers)
            .map(|_| LayerParams {
                wq: g.mat(d, d),
                bq: zeros(d),
                wk: g.mat(d, d),
                bk: zeros(d),
                wv: g.mat(d, d),
                bv: zeros(d),
                wo: g.mat(d, d),
                bo: zeros(d),
                rel: g.mat(r, dh),
                u: Array2::zeros((h, dh)),
                v: Array2::zeros((h, dh)),
                ln1_g: ones(d),
                ln1_b: zeros(d),
                w1: g.mat(d, f),
                b1: zeros(f),
                w2: g.mat(f, d),
                b2: zeros(d),
                ln2_g: ones(d),
                ln2_b: zeros(d),
            })
            .collect();
        let pool_w = g.mat(d, d);
        let mlm_w = if cfg.tie_mlm { None } else { Some(g.mat(v, d)) };
        let eq_w = g.mat(d, 2);
        let pc_w = g.mat(d, cfg.descriptor_count);
        Params {
            tok_emb,
            seg_emb,
            emb_ln_g: ones(d),
            emb_ln_b: zeros(d),
            layers,
            pool_w,
            pool_b: zeros(d),
            mlm_w,
            mlm_b: zeros(v),
            eq_w,
            eq_b: zeros(2),
            pc_w,
            pc_b: zeros(cfg.descriptor_count),
        }
    }

    /// Same shapes, all zeros.
    pub fn zeros_like(&self) -> Params<F> {
        self.map(|_| F::zero())
    }

    pub fn map<G: Real>(&self, f: impl Fn(F) -> G + Copy) -> Params<G> {
        let m1 = |a: &Array1<F>| a.mapv(f);
        let m2 = |a: &Array2<F>| a.mapv(f);
        Params {
            tok_emb: m2(&self.tok_emb),
            seg_emb: m2(&self.seg_emb),
            emb_ln_g: m1(&self.emb_ln_g),
            emb_ln_b: m1(&self.emb_ln_b),
            layers: self
                .layers
                .iter()
                .map(|l| LayerParams {
                    wq: m2(&l.wq),
                    bq: m1(&l.bq),
                    wk: m2(&l.wk),
                    bk: m1(&l.bk),
                    wv: m2(&l.wv),
                    bv: m1(&l.bv),
                    wo: m2(&l.wo),
                    bo: m1(&l.bo),
                    rel: m2(&l.rel),
                    u: m2(&l.u),
                    v: m2(&l.v),
                    ln1_g: m1(&l.ln1_g),
                    ln1_b: m1(&l.ln1_b),
                    w1: m2(&l.w1),
                    b1: m1(&l.b1),
                    w2: m2(&l.w2),
                    b2: m1(&l.b2),
                    ln2_g: m1(&l.ln2_g),
                    ln2_b: m1(&l.ln2_b),
                })
                .collect(),
            pool_w: m2(&self.pool_w),
            pool_b: m1(&self.pool_b),
            mlm_w: self.mlm_w.as_ref().map(m2),
            mlm_b: m1(&self.mlm_b),
            eq_w: m2(&self.eq_w),
            eq_b: m1(&self.eq_b),
            pc_w: m2(&self.pc_w),
            pc_b: m1(&self.pc_b),
        }
    }

    pub fn cast<G: Real>(&self) -> Params<G> {
        self.map(|x| G::from_f64(x.to_f64().expect("finite")).expect("representable"))
    }

    /// `(name, shape, data)` for every tensor in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[F])> {
        let mut out = Vec::new();
        visit_fields!(self, out, push,);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [F])> {
        let mut out = Vec::new();
        visit_fields!(self, out, push_mut, mut);
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.2.iter().all(|x| x.is_finite()))
    }

    /// The masked-LM output projection, tied or not.
    pub fn mlm_projection(&self) -> &Array2<F> {
        self.mlm_w.as_ref().unwrap_or(&self.tok_emb)
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Params<F>, alpha: F) {
        let src = other.tensors();
        for ((_, dst), (_, _, s)) in self.tensors_mut().into_iter().zip(src) {
            for (a, &b) in dst.iter_mut().zip(s) {
                *a += alpha * b;
            }
        }
    }

    /// Sum of squares of all entries.
    pub fn sq_norm(&self) -> F {
        self.tensors().iter().flat_map(|t| t.2.iter()).map(|&x| x * x).sum()
    }
}
