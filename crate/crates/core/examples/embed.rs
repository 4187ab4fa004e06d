//! Embeds molecules with a checkpoint and lists nearest neighbours by cosine.
//!
//! cargo run --release --example embed -- example.ck

use smiles_bert::checkpoint::Checkpoint;
use smiles_bert::evalbench::{cosine, Embedder, ModelEmbedder};
use smiles_bert::model::EmbedStrategy;
use smiles_bert::tokenizer::Tokenizer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "example.ck".into());
    let ck = Checkpoint::load(path.as_ref())?;
    let mut embedder = ModelEmbedder::new(&ck.params, &ck.model, EmbedStrategy::MeanSequence);
    embedder.tokenizer = Tokenizer::new(ck.vocabulary.clone(), ck.model.max_len);

    let smiles: Vec<String> = [
        "CC(=O)Oc1ccccc1C(=O)O",
        "OC(=O)c1ccccc1OC(C)=O",
        "CC(=O)Nc1ccc(O)cc1",
        "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
        "CN1C=NC2=C1C(=O)N(C(=O)N2C)C",
        "CCN(CC)CC",
    ]
    .map(String::from)
    .to_vec();
    let e = embedder.embed(&smiles)?;
    println!("{} molecules, {} dimensions", e.nrows(), e.ncols());
    for i in 0..smiles.len() {
        let (best, sim) = (0..smiles.len())
            .filter(|&j| j != i)
            .map(|j| (j, cosine(e.row(i), e.row(j))))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        println!("{:<28} nearest {:<28} cosine {sim:.4}", smiles[i], smiles[best]);
    }
    Ok(())
}
