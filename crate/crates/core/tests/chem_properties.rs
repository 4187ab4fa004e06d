use std::collections::HashSet;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smiles_bert::chem::{
    canonical_smiles, enumerate_smiles, is_isomorphic, parse_smiles, perceive_aromaticity, read_smiles_lines,
    same_molecule,
    write_smiles, Molecule,
};

fn corpus() -> Vec<Molecule> {
    let text = include_str!("../data/corpus.smi");
    read_smiles_lines(text)
        .iter()
        .map(|r| parse_smiles(&r.smiles).unwrap_or_else(|e| panic!("line {}: {e}", r.line)))
        .collect()
}

fn permutation_sets() -> Vec<(String, Vec<String>)> {
    let mut sets: Vec<(String, Vec<String>)> = Vec::new();
    for line in include_str!("../data/drug_permutations.tsv").lines() {
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        match sets.last_mut() {
            Some((name, list)) if name == cols[0] => list.push(cols[2].to_string()),
            _ => sets.push((cols[0].to_string(), vec![cols[2].to_string()])),
        }
    }
    sets
}

#[test]
fn corpus_parses_and_is_large_enough() {
    let mols = corpus();
    assert!(mols.len() >= 500, "{}", mols.len());
}

#[test]
fn round_trip_preserves_graph() {
    for m in corpus() {
        let written = write_smiles(&m);
        let back = parse_smiles(&written).unwrap_or_else(|e| panic!("{written}: {e}"));
        assert!(is_isomorphic(&m, &back), "{written}");
    }
}

#[test]
fn canonical_is_idempotent() {
    for m in corpus() {
        let c = canonical_smiles(&m);
        let again = canonical_smiles(&parse_smiles(&c).unwrap());
        assert_eq!(c, again);
    }
}

#[test]
fn canonical_agrees_with_isomorphism() {
    // distinct canonical strings <=> non-isomorphic graphs, on a sample of pairs
    let mols = corpus();
    let canon: Vec<String> = mols.iter().map(canonical_smiles).collect();
    for i in 0..120 {
        for j in (i + 1)..120 {
            let iso = is_isomorphic(&perceive_aromaticity(&mols[i]), &perceive_aromaticity(&mols[j]));
            assert_eq!(canon[i] == canon[j], iso, "{} / {}", canon[i], canon[j]);
        }
    }
}

#[test]
fn atom_relabeling_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for m in corpus() {
        let c = canonical_smiles(&m);
        for _ in 0..20 {
            let mut perm: Vec<usize> = (0..m.atom_count()).collect();
            perm.shuffle(&mut rng);
            assert_eq!(canonical_smiles(&m.relabeled(&perm)), c);
        }
    }
}

#[test]
fn enumeration_closure() {
    for (i, m) in corpus().iter().enumerate().take(200) {
        let c = canonical_smiles(m);
        for seed in 0..5 {
            let e = enumerate_smiles(m, seed * 1000 + i as u64);
            assert_eq!(canonical_smiles(&parse_smiles(&e).unwrap()), c, "{e}");
        }
    }
}

#[test]
fn drug_permutations_share_canonical_form() {
    let sets = permutation_sets();
    assert_eq!(sets.len(), 3);
    for (name, spellings) in &sets {
        assert_eq!(spellings.len(), 11, "{name}");
        let canon: HashSet<String> = spellings
            .iter()
            .map(|s| canonical_smiles(&parse_smiles(s).unwrap()))
            .collect();
        assert_eq!(canon.len(), 1, "{name}: {canon:?}");
        for s in &spellings[1..] {
            assert!(same_molecule(&spellings[0], s).unwrap());
        }
    }
    // the three drugs are different molecules
    assert!(!same_molecule(&sets[0].1[0], &sets[1].1[0]).unwrap());
    assert!(!same_molecule(&sets[1].1[0], &sets[2].1[0]).unwrap());
}

#[test]
fn venetoclax_has_many_spellings() {
    let sets = permutation_sets();
    let m = parse_smiles(&sets[2].1[0]).unwrap();
    let distinct: HashSet<String> = (0..1000).map(|s| enumerate_smiles(&m, s)).collect();
    assert!(distinct.len() >= 100, "{}", distinct.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn enumerated_spellings_parse_to_same_graph(idx in 0usize..600, seed in any::<u64>()) {
        let mols = corpus();
        let m = &mols[idx % mols.len()];
        let e = enumerate_smiles(m, seed);
        let back = parse_smiles(&e).unwrap();
        prop_assert!(is_isomorphic(m, &back));
    }
}
