//! Do equivalent spellings of one molecule embed close together? Compares the
//! mean cosine within each drug's permutation group with random pairs.
//!
//! cargo run --release --example similarity -- example.ck

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smiles_bert::checkpoint::Checkpoint;
use smiles_bert::chem::read_smiles_lines;
use smiles_bert::evalbench::{mean_pairwise_cosine, pairwise_similarity_analysis, Embedder, ModelEmbedder};
use smiles_bert::model::EmbedStrategy;
use smiles_bert::tokenizer::Tokenizer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "example.ck".into());
    let ck = Checkpoint::load(path.as_ref())?;
    let mut e = ModelEmbedder::new(&ck.params, &ck.model, EmbedStrategy::MeanSequence);
    e.tokenizer = Tokenizer::new(ck.vocabulary.clone(), ck.model.max_len);

    let mut groups: Vec<(String, Vec<String>)> = Vec::new();
    for line in include_str!("../data/drug_permutations.tsv").lines().filter(|l| !l.starts_with('#')) {
        let [name, role, smiles] = line.split('\t').collect::<Vec<_>>()[..] else { continue };
        if role != "permutation" {
            continue;
        }
        match groups.iter_mut().find(|(g, _)| g == name) {
            Some((_, v)) => v.push(smiles.to_string()),
            None => groups.push((name.to_string(), vec![smiles.to_string()])),
        }
    }
    for (name, sim) in pairwise_similarity_analysis(&groups, &e)? {
        println!("{name:<14} mean cosine among permutations {sim:.4}");
    }

    let corpus: Vec<String> = read_smiles_lines(include_str!("../data/corpus.smi"))
        .into_iter()
        .map(|r| r.smiles)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pick: Vec<String> = rand::seq::index::sample(&mut rng, corpus.len(), 100)
        .iter()
        .map(|i| corpus[i].clone())
        .collect();
    println!("random pairs   mean cosine {:.4}", mean_pairwise_cosine(e.embed(&pick)?.view())?);
    Ok(())
}
