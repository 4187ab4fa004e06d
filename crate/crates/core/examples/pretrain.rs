//! Short multi-task pretraining run on the bundled corpus; writes a checkpoint
//! the other examples can load.
//!
//! cargo run --release --example pretrain -- [out.ck] [steps]

use std::path::PathBuf;

use smiles_bert::checkpoint::Checkpoint;
use smiles_bert::chem::read_smiles_lines;
use smiles_bert::descriptors::DescriptorSet;
use smiles_bert::model::{ModelConfig, TaskSet};
use smiles_bert::tokenizer::Vocabulary;
use smiles_bert::training::{pretrain, AdamConfig, PretrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "example.ck".into()));
    let steps: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(200);

    let corpus: Vec<String> = read_smiles_lines(include_str!("../data/corpus.smi"))
        .into_iter()
        .map(|r| r.smiles)
        .collect();
    let cfg = PretrainConfig {
        tasks: TaskSet::ALL,
        batch_size: 16,
        epochs: 100,
        max_steps: Some(steps),
        log_every: 20,
        adam: AdamConfig {
            learning_rate: 1e-3,
            ..Default::default()
        },
        checkpoint_interval: None,
        ..Default::default()
    };
    let set = DescriptorSet::parse(&cfg.descriptor_set)?;
    let vocab = Vocabulary::smiles_default();
    // a narrow model so the example finishes in well under a minute
    let model = ModelConfig {
        layers: 2,
        heads: 4,
        hidden: 64,
        ff: 128,
        ..ModelConfig::small(vocab.len(), set.len())
    };
    let outcome = pretrain(&corpus, &cfg, &model, None)?;
    println!("step  loss    mlm     eq      physchem val");
    for r in &outcome.metrics {
        let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<5} {:.4}  {:<7} {:<7} {:<8} {}",
            r.step,
            r.loss_total,
            f(r.loss_mlm),
            f(r.loss_eq),
            f(r.loss_physchem),
            f(r.val_loss)
        );
    }
    Checkpoint {
        model,
        pretrain: Some(cfg),
        vocabulary: vocab,
        normalizer: outcome.normalizer,
        step: outcome.steps,
        params: outcome.params,
    }
    .save(&out)?;
    println!("checkpoint written to {}", out.display());
    Ok(())
}
