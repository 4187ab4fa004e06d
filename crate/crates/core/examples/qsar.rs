//! Cross-validated property prediction from embeddings: an RBF SVR on frozen
//! embeddings and a fine-tuned linear head. The label is a toy target (standardized
//! log molecular weight) so the example needs no external data.
//!
//! cargo run --release --example qsar -- example.ck

use ndarray::Axis;
use smiles_bert::checkpoint::Checkpoint;
use smiles_bert::chem::{parse_smiles, read_smiles_lines};
use smiles_bert::descriptors::{compute_descriptors, DescriptorSet};
use smiles_bert::evalbench::{Embedder, ModelEmbedder};
use smiles_bert::model::EmbedStrategy;
use smiles_bert::qsar::{finetune, metrics_csv, rmse, svm_fit_regress, FinetuneConfig, QsarDataset, SvmConfig, TaskType};
use smiles_bert::tokenizer::Tokenizer;
use smiles_bert::training::AdamConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "example.ck".into());
    let ck = Checkpoint::load(path.as_ref())?;
    let set = DescriptorSet::parse("MolWt")?;
    let smiles: Vec<String> = read_smiles_lines(include_str!("../data/corpus.smi"))
        .into_iter()
        .map(|r| r.smiles)
        .take(150)
        .collect();
    let mut labels = smiles
        .iter()
        .map(|s| Ok(compute_descriptors(&parse_smiles(s)?, &set).values[0].ln()))
        .collect::<Result<Vec<f64>, smiles_bert::chem::SmilesError>>()?;
    // standardize so RMSE reads in units of the label's spread
    let (mean, std) = smiles_bert::evalbench::mean_std(&labels);
    for y in &mut labels {
        *y = (*y - mean) / std;
    }
    let ds = QsarDataset {
        smiles,
        labels,
        fold_ids: None,
    };
    let folds = ds.folds(5, 0);

    let mut embedder = ModelEmbedder::new(&ck.params, &ck.model, EmbedStrategy::MeanSequence);
    embedder.tokenizer = Tokenizer::new(ck.vocabulary.clone(), ck.model.max_len);
    let emb = embedder.embed(&ds.smiles)?;
    let mut svr = Vec::new();
    for f in &folds {
        let fit: Vec<usize> = f.train.iter().chain(&f.validation).copied().collect();
        let y: Vec<f64> = fit.iter().map(|&i| ds.labels[i]).collect();
        let m = svm_fit_regress(emb.select(Axis(0), &fit).view(), &y, &SvmConfig::default())?;
        let pred = m.predict(emb.select(Axis(0), &f.test).view());
        let truth: Vec<f64> = f.test.iter().map(|&i| ds.labels[i]).collect();
        svr.push(rmse(&pred, &truth));
    }
    println!("SVR on embeddings\n{}", metrics_csv(TaskType::Regression, &svr));

    let ft = FinetuneConfig {
        epochs: 10,
        adam: AdamConfig {
            learning_rate: 1e-3,
            ..Default::default()
        },
        ..Default::default()
    };
    let mut tuned = Vec::new();
    for f in folds.iter().take(2) {
        let r = finetune(&ck.params, &ck.model, &ds, f, TaskType::Regression, &ft)?;
        let test: Vec<String> = f.test.iter().map(|&i| ds.smiles[i].clone()).collect();
        let truth: Vec<f64> = f.test.iter().map(|&i| ds.labels[i]).collect();
        tuned.push(rmse(&r.predict(&ck.model, &test), &truth));
        println!("fine-tune fold: best epoch {}, validation losses {:.3?}", r.best_epoch, r.val_losses);
    }
    println!("fine-tuned (first two folds)\n{}", metrics_csv(TaskType::Regression, &tuned));
    Ok(())
}
