#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smiles_bert::chem::{parse_smiles, read_smiles_lines, Molecule};
use smiles_bert::model::{MaskedTarget, ModelConfig, Params, Targets};
use smiles_bert::tokenizer::{TokenSequence, Tokenizer, Vocabulary, MASK_ID};

pub fn corpus_smiles() -> Vec<String> {
    read_smiles_lines(include_str!("../../data/corpus.smi"))
        .into_iter()
        .map(|r| r.smiles)
        .collect()
}

pub fn corpus() -> Vec<Molecule> {
    corpus_smiles().iter().map(|s| parse_smiles(s).unwrap()).collect()
}

/// Tiny f64 model with every parameter perturbed away from its structured
/// initialization, plus a small batch exercising pairs, padding and offsets
/// beyond the clipping distance.
pub fn gradient_fixture(tie_mlm: bool, seed: u64) -> (ModelConfig, Params<f64>, Vec<TokenSequence>, Targets<f64>) {
    let mut cfg = ModelConfig::tiny(Vocabulary::smiles_default().len(), 3);
    cfg.tie_mlm = tie_mlm;
    let mut params: Params<f64> = Params::init(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (name, t) in params.tensors_mut() {
        let gain = name.ends_with("_g");
        for x in t.iter_mut() {
            *x = if gain { 1.0 + rng.gen_range(-0.3..0.3) } else { rng.gen_range(-0.5..0.5) };
        }
    }
    let tok = Tokenizer::new(Vocabulary::smiles_default(), 24);
    let mut batch = vec![
        tok.encode_pair("CC(=O)N", "c1ccccc1").unwrap().trimmed(),
        tok.encode_single("OCCN").unwrap(),
        tok.encode_single("C1CC1Cl").unwrap().trimmed(),
    ];
    let mut masked = Vec::new();
    for (s, pos) in [(0usize, 2usize), (0, 9), (1, 1), (2, 4), (2, 6)] {
        masked.push(MaskedTarget {
            seq: s,
            pos,
            label: batch[s].ids[pos],
        });
        batch[s].ids[pos] = MASK_ID;
    }
    let physchem = Array2::from_shape_fn((3, 3), |_| rng.gen_range(0.0..1.0));
    let targets = Targets {
        masked,
        eq_labels: vec![1, 0, 1],
        physchem: Some(physchem),
    };
    (cfg, params, batch, targets)
}
