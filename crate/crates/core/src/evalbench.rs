//! Virtual-screening retrieval: cosine ranking of a pool against a few query
//! actives, AUROC / BEDROC, and mean pairwise similarity of embedding groups.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{canonicalize, read_smiles_lines};
use crate::descriptors::{compute_descriptors, DescriptorSet, Normalizer};
use crate::model::{embed_molecules, EmbedStrategy, ModelConfig, Params, Real};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("zero-norm embedding for {0}")]
    ZeroNorm(String),
    #[error("degenerate labels: {0}")]
    Degenerate(String),
    #[error("target '{target}' has {got} actives, need at least {need}")]
    TooFewActives { target: String, got: usize, need: usize },
    #[error("group '{0}' needs at least two members")]
    GroupTooSmall(String),
    #[error("length mismatch: {0}")]
    Shape(String),
    #[error("{file}:{line}: {message}")]
    Data { file: String, line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error("embedding failed: {0}")]
    Embed(String),
}

/// How the similarities to several queries are combined into one score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    #[default]
    Max,
    Mean,
}

impl FromStr for Fusion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Fusion::Max),
            "mean" => Ok(Fusion::Mean),
            _ => Err(format!("unknown fusion '{s}' (max, mean)")),
        }
    }
}

impl fmt::Display for Fusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fusion::Max => "max",
            Fusion::Mean => "mean",
        })
    }
}

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

pub fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b) / (norm(a) * norm(b))
}

fn unit_rows(m: ArrayView2<f64>, what: &str) -> Result<Array2<f64>, EvalError> {
    let mut out = m.to_owned();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let n = norm(row.view());
        if !(n > 0.0) || !n.is_finite() {
            return Err(EvalError::ZeroNorm(format!("{what} {i}")));
        }
        row /= n;
    }
    Ok(out)
}

/// Fused cosine similarity of every pool row to the query rows. Zero-norm
/// rows are reported as `query i` / `pool i`.
pub fn rank_pool(queries: ArrayView2<f64>, pool: ArrayView2<f64>, fusion: Fusion) -> Result<Vec<f64>, EvalError> {
    if queries.nrows() == 0 || queries.ncols() != pool.ncols() {
        return Err(EvalError::Shape(format!(
            "queries {:?} vs pool {:?}",
            queries.shape(),
            pool.shape()
        )));
    }
    let q = unit_rows(queries, "query")?;
    let p = unit_rows(pool, "pool")?;
    let sims = p.dot(&q.t());
    Ok(sims
        .rows()
        .into_iter()
        .map(|r| match fusion {
            Fusion::Max => r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Fusion::Mean => r.sum() / r.len() as f64,
        })
        .collect())
}

fn check_labels(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::Shape(format!("{} scores, {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::Degenerate("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::Degenerate(format!("{pos} actives, {neg} decoys")));
    }
    Ok((pos, neg))
}

/// Mann-Whitney AUROC; tied scores share their mid-rank.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64, EvalError> {
    let (pos, neg) = check_labels(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 averaged
        let mid = (i + j + 2) as f64 / 2.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// 1-based ranks of the actives when sorted by descending score, ties kept
/// in input order.
pub fn active_ranks(scores: &[f64], labels: &[bool]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
        .iter()
        .enumerate()
        .filter(|(_, &k)| labels[k])
        .map(|(r, _)| r + 1)
        .collect()
}

/// BEDROC from the ranks of the actives (1 = best) in a list of `n_total`.
pub fn bedroc_from_ranks(ranks: &[usize], n_total: usize, alpha: f64) -> Result<f64, EvalError> {
    let n = ranks.len();
    if n == 0 || n >= n_total {
        return Err(EvalError::Degenerate(format!("{n} actives among {n_total}")));
    }
    let big_n = n_total as f64;
    let ra = n as f64 / big_n;
    let sum: f64 = ranks.iter().map(|&r| (-alpha * r as f64 / big_n).exp()).sum();
    let rie = sum / (ra * (1.0 - (-alpha).exp()) / ((alpha / big_n).exp() - 1.0));
    let half = alpha / 2.0;
    Ok(rie * (ra * half.sinh()) / (half.cosh() - (half - alpha * ra).cosh()) + 1.0 / (1.0 - (alpha * (1.0 - ra)).exp()))
}

pub fn bedroc(scores: &[f64], labels: &[bool], alpha: f64) -> Result<f64, EvalError> {
    check_labels(scores, labels)?;
    bedroc_from_ranks(&active_ranks(scores, labels), scores.len(), alpha)
}

/// Maps SMILES to embedding rows.
pub trait Embedder {
    fn embed(&self, smiles: &[String]) -> Result<Array2<f64>, EvalError>;
}

impl<T> Embedder for T
where
    T: Fn(&[String]) -> Result<Array2<f64>, EvalError>,
{
    fn embed(&self, smiles: &[String]) -> Result<Array2<f64>, EvalError> {
        self(smiles)
    }
}

/// Embeddings from a trained (or freshly initialized) encoder.
pub struct ModelEmbedder<'a, F: Real> {
    pub params: &'a Params<F>,
    pub cfg: &'a ModelConfig,
    pub tokenizer: Tokenizer,
    pub strategy: EmbedStrategy,
    pub batch_size: usize,
}

impl<'a, F: Real> ModelEmbedder<'a, F> {
    pub fn new(params: &'a Params<F>, cfg: &'a ModelConfig, strategy: EmbedStrategy) -> Self {
        ModelEmbedder {
            params,
            cfg,
            tokenizer: Tokenizer::default(),
            strategy,
            batch_size: 32,
        }
    }
}

impl<F: Real> Embedder for ModelEmbedder<'_, F> {
    fn embed(&self, smiles: &[String]) -> Result<Array2<f64>, EvalError> {
        let e = embed_molecules(self.params, self.cfg, &self.tokenizer, smiles, self.strategy, self.batch_size);
        Ok(e.mapv(|x| x.to_f64().unwrap_or(f64::NAN)))
    }
}

/// Descriptor vectors as embeddings, CDF-normalized when a normalizer is
/// given. A reference baseline for the learned embeddings.
pub struct DescriptorEmbedder {
    pub set: DescriptorSet,
    pub normalizer: Option<Normalizer>,
}

impl Embedder for DescriptorEmbedder {
    fn embed(&self, smiles: &[String]) -> Result<Array2<f64>, EvalError> {
        let mut out = Array2::zeros((smiles.len(), self.set.len()));
        for (i, s) in smiles.iter().enumerate() {
            let mol = crate::chem::parse_smiles(s).map_err(|e| EvalError::Embed(format!("{s}: {e}")))?;
            let raw = compute_descriptors(&mol, &self.set);
            let v = match &self.normalizer {
                Some(n) => n.normalize(&raw).map_err(|e| EvalError::Embed(e.to_string()))?,
                None => raw.values,
            };
            out.row_mut(i).assign(&ArrayView1::from(&v[..]));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningDataset {
    pub target: String,
    pub actives: Vec<String>,
    pub decoys: Vec<String>,
}

fn read_smi(path: &Path) -> Result<Vec<String>, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    Ok(read_smiles_lines(&text).into_iter().map(|r| r.smiles).collect())
}

impl ScreeningDataset {
    /// Checks the minimum number of actives and that no decoy is the same
    /// molecule as an active.
    pub fn validate(&self, n_queries: usize) -> Result<(), EvalError> {
        if self.actives.len() < n_queries + 1 {
            return Err(EvalError::TooFewActives {
                target: self.target.clone(),
                got: self.actives.len(),
                need: n_queries + 1,
            });
        }
        if self.decoys.is_empty() {
            return Err(EvalError::Degenerate(format!("target '{}' has no decoys", self.target)));
        }
        let canon = |s: &String| canonicalize(s).unwrap_or_else(|_| s.clone());
        let actives: std::collections::HashSet<String> = self.actives.iter().map(canon).collect();
        if let Some((i, d)) = self.decoys.iter().enumerate().find(|(_, d)| actives.contains(&canon(d))) {
            return Err(EvalError::Data {
                file: format!("{}/decoys.smi", self.target),
                line: i + 1,
                message: format!("decoy {d} is also an active"),
            });
        }
        Ok(())
    }

    /// Reads `<dir>/actives.smi` and `<dir>/decoys.smi`.
    pub fn load(dir: &Path) -> Result<ScreeningDataset, EvalError> {
        let target = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        Ok(ScreeningDataset {
            target,
            actives: read_smi(&dir.join("actives.smi"))?,
            decoys: read_smi(&dir.join("decoys.smi"))?,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<(), EvalError> {
        let io = |e: std::io::Error| EvalError::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join("actives.smi"), self.actives.join("\n") + "\n").map_err(io)?;
        fs::write(dir.join("decoys.smi"), self.decoys.join("\n") + "\n").map_err(io)?;
        Ok(())
    }
}

/// Every subdirectory containing an `actives.smi`, sorted by name.
pub fn load_benchmark(root: &Path) -> Result<Vec<ScreeningDataset>, EvalError> {
    let entries = fs::read_dir(root).map_err(|e| EvalError::Io(format!("{}: {e}", root.display())))?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("actives.smi").is_file())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(EvalError::Io(format!("{}: no target directories", root.display())));
    }
    dirs.iter().map(|d| ScreeningDataset::load(d)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenConfig {
    pub n_queries: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub fusion: Fusion,
    pub alpha: f64,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig {
            n_queries: 5,
            repetitions: 50,
            seed: 0,
            fusion: Fusion::Max,
            alpha: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreenResult {
    pub target: String,
    pub auroc: Vec<f64>,
    pub bedroc: Vec<f64>,
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl ScreenResult {
    pub fn auroc_stats(&self) -> (f64, f64) {
        mean_std(&self.auroc)
    }

    pub fn bedroc_stats(&self) -> (f64, f64) {
        mean_std(&self.bedroc)
    }
}

/// Header `target,auroc_mean,auroc_std,bedroc_mean,bedroc_std`.
pub fn screen_csv(results: &[ScreenResult]) -> String {
    let mut out = String::from("target,auroc_mean,auroc_std,bedroc_mean,bedroc_std\n");
    for r in results {
        let (am, asd) = r.auroc_stats();
        let (bm, bsd) = r.bedroc_stats();
        out.push_str(&format!("{},{am:.6},{asd:.6},{bm:.6},{bsd:.6}\n", r.target));
    }
    out
}

/// Repeated retrieval: each repetition draws `n_queries` actives as
/// queries and ranks the remaining actives plus all decoys.
pub fn run_screen(
    dataset: &ScreeningDataset,
    embedder: &dyn Embedder,
    cfg: &ScreenConfig,
) -> Result<ScreenResult, EvalError> {
    dataset.validate(cfg.n_queries)?;
    let na = dataset.actives.len();
    let all: Vec<String> = dataset.actives.iter().chain(&dataset.decoys).cloned().collect();
    let emb = embedder.embed(&all)?;
    if emb.nrows() != all.len() {
        return Err(EvalError::Shape(format!("{} embeddings for {} molecules", emb.nrows(), all.len())));
    }
    let unit = unit_rows(emb.view(), "molecule").map_err(|e| match e {
        EvalError::ZeroNorm(what) => {
            let i: usize = what.rsplit(' ').next().and_then(|s| s.parse().ok()).unwrap_or(0);
            EvalError::ZeroNorm(all[i].clone())
        }
        other => other,
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut result = ScreenResult {
        target: dataset.target.clone(),
        auroc: Vec::with_capacity(cfg.repetitions),
        bedroc: Vec::with_capacity(cfg.repetitions),
    };
    for _ in 0..cfg.repetitions {
        let mut is_query = vec![false; all.len()];
        let mut queries: Vec<usize> = sample(&mut rng, na, cfg.n_queries).into_vec();
        queries.sort_unstable();
        for &q in &queries {
            is_query[q] = true;
        }
        let pool: Vec<usize> = (0..all.len()).filter(|&i| !is_query[i]).collect();
        let q = unit.select(ndarray::Axis(0), &queries);
        let p = unit.select(ndarray::Axis(0), &pool);
        let scores = rank_pool(q.view(), p.view(), cfg.fusion)?;
        let labels: Vec<bool> = pool.iter().map(|&i| i < na).collect();
        result.auroc.push(auroc(&scores, &labels)?);
        result.bedroc.push(bedroc(&scores, &labels, cfg.alpha)?);
    }
    Ok(result)
}

/// Mean cosine similarity over all unordered pairs of distinct rows.
pub fn mean_pairwise_cosine(emb: ArrayView2<f64>) -> Result<f64, EvalError> {
    let n = emb.nrows();
    if n < 2 {
        return Err(EvalError::Shape("need at least two rows".into()));
    }
    let u = unit_rows(emb, "row")?;
    let g = u.dot(&u.t());
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            sum += g[[i, j]];
        }
    }
    Ok(sum / (n * (n - 1) / 2) as f64)
}

/// Per-group mean pairwise cosine similarity of the embeddings.
pub fn pairwise_similarity_analysis(
    groups: &[(String, Vec<String>)],
    embedder: &dyn Embedder,
) -> Result<Vec<(String, f64)>, EvalError> {
    groups
        .iter()
        .map(|(name, members)| {
            if members.len() < 2 {
                return Err(EvalError::GroupTooSmall(name.clone()));
            }
            let e = embedder.embed(members)?;
            let m = mean_pairwise_cosine(e.view()).map_err(|err| match err {
                EvalError::ZeroNorm(what) => EvalError::ZeroNorm(format!("{what} of group '{name}'")),
                other => other,
            })?;
            Ok((name.clone(), m))
        })
        .collect()
}

/// Parses `group,smiles` lines (header optional) preserving first-seen
/// group order.
pub fn parse_groups(text: &str, file: &str) -> Result<Vec<(String, Vec<String>)>, EvalError> {
    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line == "group,smiles") {
            continue;
        }
        let Some((g, s)) = line.split_once(',') else {
            return Err(EvalError::Data {
                file: file.into(),
                line: i + 1,
                message: "expected 'group,smiles'".into(),
            });
        };
        let (g, s) = (g.trim().to_string(), s.trim().to_string());
        match groups.iter_mut().find(|(name, _)| *name == g) {
            Some((_, v)) => v.push(s),
            None => groups.push((g, vec![s])),
        }
    }
    Ok(groups)
}
