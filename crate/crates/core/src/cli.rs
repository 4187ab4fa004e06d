//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
//! error, 3 numeric failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use ndarray::Axis;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::checkpoint::Checkpoint;
use crate::chem::{canonical_smiles, enumerate_with_rng, parse_smiles, read_smiles_lines, SmilesRecord};
use crate::descriptors::{compute_descriptors, DescriptorSet};
use crate::evalbench::{
    load_benchmark, pairwise_similarity_analysis, parse_groups, run_screen, screen_csv, DescriptorEmbedder, Embedder,
    Fusion, ModelEmbedder, ScreenConfig,
};
use crate::model::{embed_molecules, EmbedStrategy, ModelConfig, TaskSet};
use crate::qsar::{
    finetune, metrics_csv as qsar_csv, svm_fit_classify, svm_fit_regress, task_metric, FinetuneConfig, QsarDataset,
    QsarError, SvmConfig, TaskType,
};
use crate::synthetic::synthetic_screening;
use crate::tokenizer::Tokenizer;
use crate::training::{metrics_csv, pretrain, PretrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            TrainError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<QsarError> for CliError {
    fn from(e: QsarError) -> Self {
        match e {
            QsarError::NonFinite(_) => CliError::Numeric(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "smiles-bert", version, about = "Multi-task SMILES transformer: pretraining, embedding, screening and QSAR")]
pub struct Cli {
    /// Worker threads; computations are single-threaded and deterministic.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Pretrain a model on a SMILES corpus and write a checkpoint.
    Pretrain(PretrainArgs),
    /// Write one embedding row per input SMILES.
    Embed(EmbedArgs),
    /// Virtual-screening benchmark over a directory of targets.
    Screen(ScreenArgs),
    /// Cross-validated property prediction.
    Qsar(QsarArgs),
    /// Compute descriptor vectors.
    Descriptors(DescriptorArgs),
    /// Canonical SMILES for each input line.
    Canonicalize(IoArgs),
    /// Random equivalent spellings for each input line.
    Enumerate(EnumerateArgs),
    /// Mean pairwise cosine similarity within groups of molecules.
    AnalyzeSimilarity(SimilarityArgs),
    /// Write a synthetic screening benchmark directory.
    SynthBenchmark(SynthArgs),
}

#[derive(Debug, Args)]
struct IoArgs {
    /// SMILES file, one molecule per line.
    #[arg(long)]
    input: PathBuf,
    /// Output file (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PretrainArgs {
    /// JSON config: {"preset": "...", "model": {...}, "pretrain": {...}}.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    /// Checkpoint path; interval checkpoints get a `.step<N>` suffix.
    #[arg(long)]
    out: PathBuf,
    /// Metrics CSV path.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Model preset: tiny, small or paper.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Comma-separated subset of masked_lm, smiles_eq, physchem.
    #[arg(long)]
    tasks: Option<String>,
    #[arg(long, overrides_with = "no_permute")]
    permute: bool,
    #[arg(long)]
    no_permute: bool,
    #[arg(long)]
    descriptor_set: Option<String>,
    #[arg(long)]
    checkpoint_interval: Option<usize>,
    #[arg(long)]
    log_every: Option<usize>,
    /// Train on the whole corpus instead of the hash-based 80% split.
    #[arg(long)]
    no_holdout: bool,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    io: IoArgs,
    /// pooled or mean_sequence.
    #[arg(long, default_value = "pooled")]
    strategy: EmbedStrategy,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
}

#[derive(Debug, Args)]
struct ScreenArgs {
    /// Required unless --embedder descriptors.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Directory of `<target>/actives.smi` + `<target>/decoys.smi`.
    #[arg(long)]
    benchmark: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// model or descriptors.
    #[arg(long, default_value = "model")]
    embedder: String,
    #[arg(long, default_value = "pooled")]
    strategy: EmbedStrategy,
    #[arg(long, default_value = "max")]
    fusion: Fusion,
    #[arg(long, default_value_t = 5)]
    queries: usize,
    #[arg(long, default_value_t = 50)]
    repetitions: usize,
    #[arg(long, default_value_t = 20.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct QsarArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// CSV with columns smiles,label[,fold].
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// svm or finetune.
    #[arg(long, default_value = "svm")]
    mode: String,
    #[arg(long)]
    task: TaskType,
    /// Number of folds when the dataset has no fold column.
    #[arg(long, default_value_t = 5)]
    folds: usize,
    #[arg(long, default_value = "pooled")]
    strategy: EmbedStrategy,
    #[arg(long, default_value_t = 5.0)]
    c: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// RBF bandwidth; defaults to 1/(d·Var(X)).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    freeze_encoder: bool,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 3e-5)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct DescriptorArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Set name or comma-separated descriptor names.
    #[arg(long, default_value = "ALL_IMPLEMENTED")]
    set: String,
    /// Normalize with this checkpoint's fitted CDFs (its descriptor set is used).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EnumerateArgs {
    #[command(flatten)]
    io: IoArgs,
    /// Spellings per input molecule.
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SimilarityArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// CSV lines `group,smiles`.
    #[arg(long)]
    groups: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value = "pooled")]
    strategy: EmbedStrategy,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    targets: usize,
    #[arg(long, default_value_t = 30)]
    actives: usize,
    #[arg(long, default_value_t = 300)]
    decoys: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Reads a SMILES file; every record must parse.
fn read_molecules(path: &Path) -> Result<Vec<SmilesRecord>, CliError> {
    let recs = read_smiles_lines(&read_text(path)?);
    for r in &recs {
        parse_smiles(&r.smiles).map_err(|e| CliError::Data(format!("{}:{}: {}: {e}", path.display(), r.line, r.smiles)))?;
    }
    Ok(recs)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    Checkpoint::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn tokenizer_of(ck: &Checkpoint) -> Tokenizer {
    Tokenizer::new(ck.vocabulary.clone(), ck.model.max_len)
}

fn model_embedder(ck: &Checkpoint, strategy: EmbedStrategy) -> ModelEmbedder<'_, f32> {
    let mut e = ModelEmbedder::new(&ck.params, &ck.model, strategy);
    e.tokenizer = tokenizer_of(ck);
    e
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    preset: Option<String>,
    #[serde(default)]
    model: serde_json::Map<String, Value>,
    #[serde(default)]
    pretrain: serde_json::Map<String, Value>,
}

fn merge<T: serde::Serialize + serde::de::DeserializeOwned>(
    base: &T,
    overrides: &serde_json::Map<String, Value>,
    what: &str,
) -> Result<T, CliError> {
    let mut v = serde_json::to_value(base).expect("config serializes");
    let obj = v.as_object_mut().expect("config is an object");
    for (k, val) in overrides {
        if !obj.contains_key(k) {
            return Err(CliError::Usage(format!("unknown {what} config key '{k}'")));
        }
        obj.insert(k.clone(), val.clone());
    }
    serde_json::from_value(v).map_err(|e| CliError::Usage(format!("invalid {what} config: {e}")))
}

fn parse_tasks(s: &str) -> Result<TaskSet, CliError> {
    let mut t = TaskSet {
        masked_lm: false,
        smiles_eq: false,
        physchem: false,
    };
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part {
            "masked_lm" | "mlm" => t.masked_lm = true,
            "smiles_eq" | "eq" => t.smiles_eq = true,
            "physchem" => t.physchem = true,
            _ => return Err(CliError::Usage(format!("unknown task '{part}'"))),
        }
    }
    if t.count() == 0 {
        return Err(CliError::Usage("at least one task is required".into()));
    }
    Ok(t)
}

/// Resolves the model and training configs from file plus flags.
fn pretrain_configs(a: &PretrainArgs) -> Result<(ModelConfig, PretrainConfig), CliError> {
    let file: ConfigFile = match &a.config {
        Some(p) => serde_json::from_str(&read_text(p)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        None => ConfigFile::default(),
    };
    let mut pc: PretrainConfig = merge(&PretrainConfig::default(), &file.pretrain, "pretrain")?;
    if let Some(v) = a.epochs {
        pc.epochs = v;
    }
    if a.max_steps.is_some() {
        pc.max_steps = a.max_steps;
    }
    if let Some(v) = a.batch_size {
        pc.batch_size = v;
    }
    if let Some(v) = a.lr {
        pc.adam.learning_rate = v;
    }
    if let Some(t) = &a.tasks {
        pc.tasks = parse_tasks(t)?;
    }
    if a.permute {
        pc.permute_inputs = true;
    }
    if a.no_permute {
        pc.permute_inputs = false;
    }
    if let Some(s) = &a.descriptor_set {
        pc.descriptor_set = s.clone();
    }
    if a.checkpoint_interval.is_some() {
        pc.checkpoint_interval = a.checkpoint_interval;
    }
    if let Some(v) = a.log_every {
        pc.log_every = v;
    }
    if a.no_holdout {
        pc.holdout = false;
    }
    let set = DescriptorSet::parse(&pc.descriptor_set).map_err(|e| CliError::Usage(e.to_string()))?;
    let vocab_len = crate::tokenizer::Vocabulary::smiles_default().len();
    let preset = a.preset.clone().or(file.preset).unwrap_or_else(|| "small".into());
    let base = ModelConfig::preset(&preset, vocab_len, set.len())
        .ok_or_else(|| CliError::Usage(format!("unknown preset '{preset}' (tiny, small, paper)")))?;
    let mut mc: ModelConfig = merge(&base, &file.model, "model")?;
    if let Some(v) = a.max_len {
        mc.max_len = v;
    }
    if let Some(s) = a.seed {
        pc.seed = s;
        mc.seed = s;
    }
    mc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    pc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((mc, pc))
}

fn cmd_pretrain(a: &PretrainArgs) -> Result<(), CliError> {
    let (mc, pc) = pretrain_configs(a)?;
    let text = read_text(&a.corpus)?;
    let recs = read_smiles_lines(&text);
    for r in &recs {
        if let Err(e) = parse_smiles(&r.smiles) {
            warn!("{}:{}: skipping {}: {e}", a.corpus.display(), r.line, r.smiles);
        }
    }
    let smiles: Vec<String> = recs.into_iter().map(|r| r.smiles).collect();
    let vocab = crate::tokenizer::Vocabulary::smiles_default();
    let checkpoint = |step: usize, params: &crate::model::Params<f32>, norm: &crate::descriptors::Normalizer| Checkpoint {
        model: mc.clone(),
        pretrain: Some(pc.clone()),
        vocabulary: vocab.clone(),
        normalizer: norm.clone(),
        step,
        params: params.clone(),
    };
    let mut last_saved = 0;
    let mut on_ck = |step: usize, params: &crate::model::Params<f32>, norm: &crate::descriptors::Normalizer| {
        // interval snapshots only; the final checkpoint is written below
        if step == last_saved || !pc.checkpoint_interval.is_some_and(|k| step % k == 0) {
            return Ok(());
        }
        last_saved = step;
        let mut p = a.out.clone().into_os_string();
        p.push(format!(".step{step}"));
        let path = PathBuf::from(p);
        checkpoint(step, params, norm).save(&path).map_err(|e| e.to_string())?;
        info!("wrote checkpoint {}", path.display());
        Ok(())
    };
    let outcome = pretrain(&smiles, &pc, &mc, Some(&mut on_ck))?;
    checkpoint(outcome.steps, &outcome.params, &outcome.normalizer)
        .save(&a.out)
        .map_err(data)?;
    if let Some(m) = &a.metrics {
        write_output(Some(m), &metrics_csv(&outcome.metrics))?;
    }
    eprintln!(
        "trained {} steps on {} molecules ({} unparsable, {} too long); checkpoint {}",
        outcome.steps,
        outcome.train_size,
        outcome.skipped_parse,
        outcome.skipped_overflow,
        a.out.display()
    );
    Ok(())
}

fn cmd_embed(a: &EmbedArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let recs = read_molecules(&a.io.input)?;
    let smiles: Vec<&str> = recs.iter().map(|r| r.smiles.as_str()).collect();
    let tok = tokenizer_of(&ck);
    let e = embed_molecules(&ck.params, &ck.model, &tok, &smiles, a.strategy, a.batch_size);
    if e.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numeric("non-finite embedding".into()));
    }
    let mut out = String::from("smiles");
    for k in 0..e.ncols() {
        let _ = write!(out, ",e{k}");
    }
    out.push('\n');
    for (s, row) in smiles.iter().zip(e.axis_iter(Axis(0))) {
        out.push_str(s);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    write_output(a.io.output.as_deref(), &out)
}

fn cmd_screen(a: &ScreenArgs) -> Result<(), CliError> {
    let sets = load_benchmark(&a.benchmark).map_err(data)?;
    let cfg = ScreenConfig {
        n_queries: a.queries,
        repetitions: a.repetitions,
        seed: a.seed,
        fusion: a.fusion,
        alpha: a.alpha,
    };
    let ck = a.checkpoint.as_deref().map(load_checkpoint).transpose()?;
    let model;
    let desc;
    let embedder: &dyn Embedder = match (a.embedder.as_str(), &ck) {
        ("model", Some(ck)) => {
            model = model_embedder(ck, a.strategy);
            &model
        }
        ("model", None) => return Err(CliError::Usage("--checkpoint is required with --embedder model".into())),
        ("descriptors", _) => {
            desc = DescriptorEmbedder {
                set: ck.as_ref().map_or_else(DescriptorSet::all, |c| c.normalizer.set.clone()),
                normalizer: ck.as_ref().map(|c| c.normalizer.clone()),
            };
            &desc
        }
        (other, _) => return Err(CliError::Usage(format!("unknown embedder '{other}' (model, descriptors)"))),
    };
    let mut results = Vec::new();
    for ds in &sets {
        let r = run_screen(ds, embedder, &cfg).map_err(|e| CliError::Data(format!("target {}: {e}", ds.target)))?;
        let (am, _) = r.auroc_stats();
        info!("{}: mean AUROC {am:.4}", ds.target);
        results.push(r);
    }
    write_output(a.output.as_deref(), &screen_csv(&results))
}

fn cmd_qsar(a: &QsarArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let name = a.dataset.display().to_string();
    let ds = QsarDataset::parse_csv(&read_text(&a.dataset)?, &name)?;
    let folds = ds.folds(a.folds, a.seed);
    let mut per_fold = Vec::new();
    match a.mode.as_str() {
        "svm" => {
            let emb = model_embedder(&ck, a.strategy).embed(&ds.smiles).map_err(data)?;
            let svm = SvmConfig {
                c: a.c,
                epsilon: a.epsilon,
                gamma: a.gamma,
                ..SvmConfig::default()
            };
            for (k, f) in folds.iter().enumerate() {
                let fit: Vec<usize> = f.train.iter().chain(&f.validation).copied().collect();
                if fit.is_empty() || f.test.is_empty() {
                    return Err(CliError::Data(format!("fold {k} has an empty split")));
                }
                let x = emb.select(Axis(0), &fit);
                let xt = emb.select(Axis(0), &f.test);
                let yt: Vec<f64> = f.test.iter().map(|&i| ds.labels[i]).collect();
                let pred = match a.task {
                    TaskType::Classification => {
                        let y: Vec<u8> = fit.iter().map(|&i| (ds.labels[i] > 0.5) as u8).collect();
                        svm_fit_classify(x.view(), &y, &svm)?.decision_function(xt.view())
                    }
                    TaskType::Regression => {
                        let y: Vec<f64> = fit.iter().map(|&i| ds.labels[i]).collect();
                        svm_fit_regress(x.view(), &y, &svm)?.decision_function(xt.view())
                    }
                };
                per_fold.push(task_metric(a.task, &pred, &yt).map_err(|e| CliError::Data(format!("fold {k}: {e}")))?);
            }
        }
        "finetune" => {
            let ft = FinetuneConfig {
                adam: crate::training::AdamConfig {
                    learning_rate: a.lr,
                    ..Default::default()
                },
                epochs: a.epochs,
                batch_size: a.batch_size,
                freeze_encoder: a.freeze_encoder,
                seed: a.seed,
            };
            for (k, f) in folds.iter().enumerate() {
                let r = finetune(&ck.params, &ck.model, &ds, f, a.task, &ft)?;
                let test: Vec<String> = f.test.iter().map(|&i| ds.smiles[i].clone()).collect();
                let yt: Vec<f64> = f.test.iter().map(|&i| ds.labels[i]).collect();
                let pred = r.predict(&ck.model, &test);
                info!("fold {k}: best epoch {}", r.best_epoch);
                per_fold.push(task_metric(a.task, &pred, &yt).map_err(|e| CliError::Data(format!("fold {k}: {e}")))?);
            }
        }
        other => return Err(CliError::Usage(format!("unknown mode '{other}' (svm, finetune)"))),
    }
    write_output(a.output.as_deref(), &qsar_csv(a.task, &per_fold))
}

fn cmd_descriptors(a: &DescriptorArgs) -> Result<(), CliError> {
    let ck = a.checkpoint.as_deref().map(load_checkpoint).transpose()?;
    let set = match &ck {
        Some(c) => c.normalizer.set.clone(),
        None => DescriptorSet::parse(&a.set).map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let recs = read_molecules(&a.io.input)?;
    let mut out = String::from("smiles");
    for d in set.members() {
        let _ = write!(out, ",{}", d.name());
    }
    out.push('\n');
    for r in &recs {
        let mol = parse_smiles(&r.smiles).map_err(data)?;
        let v = compute_descriptors(&mol, &set);
        let vals = match &ck {
            Some(c) => c.normalizer.normalize(&v).map_err(data)?,
            None => v.values,
        };
        out.push_str(&r.smiles);
        for x in vals {
            let _ = write!(out, ",{x}");
        }
        out.push('\n');
    }
    write_output(a.io.output.as_deref(), &out)
}

fn cmd_canonicalize(a: &IoArgs) -> Result<(), CliError> {
    let mut out = String::new();
    for r in read_molecules(&a.input)? {
        out.push_str(&canonical_smiles(&parse_smiles(&r.smiles).map_err(data)?));
        out.push('\n');
    }
    write_output(a.output.as_deref(), &out)
}

fn cmd_enumerate(a: &EnumerateArgs) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut out = String::new();
    for r in read_molecules(&a.io.input)? {
        let mol = parse_smiles(&r.smiles).map_err(data)?;
        for _ in 0..a.count {
            out.push_str(&enumerate_with_rng(&mol, &mut rng));
            out.push('\n');
        }
    }
    write_output(a.io.output.as_deref(), &out)
}

fn cmd_similarity(a: &SimilarityArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    let name = a.groups.display().to_string();
    let groups = parse_groups(&read_text(&a.groups)?, &name).map_err(data)?;
    let e = model_embedder(&ck, a.strategy);
    let res = pairwise_similarity_analysis(&groups, &e).map_err(data)?;
    let mut out = String::from("group,n,mean_pairwise_cosine\n");
    for ((g, members), (_, m)) in groups.iter().zip(&res) {
        let _ = writeln!(out, "{g},{},{m:.6}", members.len());
    }
    write_output(a.output.as_deref(), &out)
}

fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    if a.actives < 6 {
        return Err(CliError::Usage("--actives must be at least 6".into()));
    }
    for ds in synthetic_screening(a.targets, a.actives, a.decoys, a.seed) {
        ds.save(&a.out.join(&ds.target)).map_err(data)?;
    }
    Ok(())
}

/// Parses arguments and runs a subcommand; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return 1;
    }
    if cli.threads > 1 {
        info!("--threads {}: all computations run on one thread for reproducibility", cli.threads);
    }
    let res = match &cli.command {
        Command::Pretrain(a) => cmd_pretrain(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Screen(a) => cmd_screen(a),
        Command::Qsar(a) => cmd_qsar(a),
        Command::Descriptors(a) => cmd_descriptors(a),
        Command::Canonicalize(a) => cmd_canonicalize(a),
        Command::Enumerate(a) => cmd_enumerate(a),
        Command::AnalyzeSimilarity(a) => cmd_similarity(a),
        Command::SynthBenchmark(a) => cmd_synth(a),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
