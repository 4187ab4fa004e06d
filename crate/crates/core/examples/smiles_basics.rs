//! Parsing, canonical forms, random spellings and tokenization.

use smiles_bert::chem::{canonical_smiles, enumerate_smiles, parse_smiles, same_molecule};
use smiles_bert::tokenizer::Tokenizer;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let paracetamol = parse_smiles("CC(=O)Nc1ccc(O)cc1")?;
    println!("heavy atoms: {}", paracetamol.heavy_atom_count());
    println!("canonical:   {}", canonical_smiles(&paracetamol));

    for seed in 0..5 {
        let s = enumerate_smiles(&paracetamol, seed);
        println!("spelling {seed}: {s:<24} same molecule: {}", same_molecule(&s, "CC(=O)Nc1ccc(O)cc1")?);
    }

    // Kekule and aromatic spellings of benzene agree
    println!("benzene forms agree: {}", same_molecule("C1=CC=CC=C1", "c1ccccc1")?);

    let tok = Tokenizer::default();
    let seq = tok.encode_pair("CCO", "OCC")?;
    let tokens: Vec<&str> = seq.ids[..seq.length].iter().map(|&id| tok.vocab.token(id)).collect();
    println!("pair tokens: {}", tokens.join(" "));
    println!("segments:    {:?}", &seq.segment_ids[..seq.length]);
    Ok(())
}
