//! Similarity-search benchmark on synthetic targets: descriptor baseline
//! versus model embeddings (a checkpoint if given, else random weights).
//!
//! cargo run --release --example virtual_screen -- [example.ck]

use smiles_bert::checkpoint::Checkpoint;
use smiles_bert::descriptors::DescriptorSet;
use smiles_bert::evalbench::{run_screen, screen_csv, DescriptorEmbedder, Embedder, ModelEmbedder, ScreenConfig};
use smiles_bert::model::{EmbedStrategy, ModelConfig, Params};
use smiles_bert::synthetic::synthetic_screening;
use smiles_bert::tokenizer::{Tokenizer, Vocabulary};

fn report(name: &str, e: &dyn Embedder) -> Result<(), Box<dyn std::error::Error>> {
    let sets = synthetic_screening(3, 20, 200, 1);
    let cfg = ScreenConfig {
        repetitions: 20,
        ..Default::default()
    };
    let results = sets.iter().map(|d| run_screen(d, e, &cfg)).collect::<Result<Vec<_>, _>>()?;
    println!("{name}\n{}", screen_csv(&results));
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    report(
        "descriptors (raw)",
        &DescriptorEmbedder {
            set: DescriptorSet::all(),
            normalizer: None,
        },
    )?;
    match std::env::args().nth(1) {
        Some(path) => {
            let ck = Checkpoint::load(path.as_ref())?;
            let mut e = ModelEmbedder::new(&ck.params, &ck.model, EmbedStrategy::Pooled);
            e.tokenizer = Tokenizer::new(ck.vocabulary.clone(), ck.model.max_len);
            report(&format!("model {path}"), &e)
        }
        None => {
            let cfg = ModelConfig::tiny(Vocabulary::smiles_default().len(), DescriptorSet::all().len());
            let params: Params<f32> = Params::init(&cfg);
            report("model (random weights)", &ModelEmbedder::new(&params, &cfg, EmbedStrategy::MeanSequence))
        }
    }
}
