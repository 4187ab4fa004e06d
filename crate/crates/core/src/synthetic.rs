//! Seeded generator of small drug-like molecules and of screening sets whose
//! actives share a physicochemical profile. Molecules are linear chains of
//! SMILES fragments, so every output parses.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chem::{canonicalize, parse_smiles};
use crate::descriptors::{compute_descriptors, fit_normalizer, DescriptorSet};
use crate::evalbench::ScreeningDataset;

/// Chain fragments. Each continues the chain from its last atom.
const UNITS: &[&str] = &[
    "C",
    "CC",
    "C(C)",
    "C(C)(C)",
    "c1ccc(cc1)",
    "c1ccc(nc1)",
    "c1cc(ccc1Cl)",
    "c1cc(ccc1F)",
    "C1CCC(CC1)",
    "C1CCN(CC1)",
    "N",
    "O",
    "C(=O)",
    "C(=O)N",
    "C(=O)O",
    "C(O)",
    "C(N)",
    "S",
    "S(=O)(=O)N",
    "C(F)(F)",
    "C(Cl)",
    "C=C",
    "C#C",
    "c1ccc2ccccc2c1",
];

/// Chain length range and fragment weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub min_units: usize,
    pub max_units: usize,
    pub weights: Vec<f64>,
}

impl Profile {
    /// Every fragment equally likely.
    pub fn broad() -> Profile {
        Profile {
            min_units: 3,
            max_units: 12,
            weights: vec![1.0; UNITS.len()],
        }
    }

    /// A narrow profile concentrating on a handful of fragments.
    pub fn random_focused<R: Rng + ?Sized>(rng: &mut R) -> Profile {
        let mut weights = vec![0.02; UNITS.len()];
        let favored = rand::seq::index::sample(rng, UNITS.len(), 4);
        for i in favored.iter() {
            weights[i] = rng.gen_range(1.0..3.0);
        }
        let min_units = rng.gen_range(3..8);
        Profile {
            min_units,
            max_units: min_units + 2,
            weights,
        }
    }
}

pub fn generate_molecule<R: Rng + ?Sized>(profile: &Profile, rng: &mut R) -> String {
    let dist = WeightedIndex::new(&profile.weights).expect("positive weights");
    let n = rng.gen_range(profile.min_units..=profile.max_units);
    let mut s = String::new();
    let mut prev_bare_n_or_o = false;
    for _ in 0..n {
        let u = UNITS[dist.sample(rng)];
        // avoid peroxides, hydrazines and the like
        let bare = matches!(u, "N" | "O" | "S");
        if bare && prev_bare_n_or_o {
            s.push('C');
        }
        s.push_str(u);
        prev_bare_n_or_o = bare || u.ends_with('N') || u.ends_with('O');
    }
    s
}

/// `n` distinct molecules (by canonical form) from a profile.
pub fn generate_distinct<R: Rng + ?Sized>(
    profile: &Profile,
    n: usize,
    exclude: &mut HashSet<String>,
    rng: &mut R,
) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 200 * n {
        attempts += 1;
        let s = generate_molecule(profile, rng);
        let Ok(c) = canonicalize(&s) else { continue };
        if exclude.insert(c) {
            out.push(s);
        }
    }
    out
}

/// A corpus of broad-profile molecules for pretraining.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    // mix broad molecules with focused families so the corpus has structure
    while out.len() < n {
        let profile = if rng.gen_bool(0.5) {
            Profile::broad()
        } else {
            Profile::random_focused(&mut rng)
        };
        let k = (n - out.len()).min(10);
        out.extend(generate_distinct(&profile, k, &mut seen, &mut rng));
    }
    out
}

/// Screening targets whose actives share a descriptor profile. A pool of
/// broad molecules is drawn; each target picks a random center, its actives
/// are the center's nearest neighbours in CDF-normalized descriptor space and
/// its decoys are drawn from the rest of the pool outside the closest 10%.
pub fn synthetic_screening(targets: usize, actives: usize, decoys: usize, seed: u64) -> Vec<ScreeningDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool_size = (targets * (actives + decoys)).max(10 * (actives + decoys));
    let mut seen = HashSet::new();
    let pool = generate_distinct(&Profile::broad(), pool_size, &mut seen, &mut rng);
    let mols: Vec<_> = pool.iter().map(|s| parse_smiles(s).expect("generated SMILES parse")).collect();
    let set = DescriptorSet::all();
    let raw: Vec<_> = mols.iter().map(|m| compute_descriptors(m, &set)).collect();
    let normalizer = fit_normalizer(&set, raw.iter().cloned(), seed).expect("pool has many molecules");
    let vecs: Vec<Vec<f64>> = raw.iter().map(|v| normalizer.normalize(v).expect("same set")).collect();
    let mut used = vec![false; pool.len()];
    let mut out = Vec::with_capacity(targets);
    for t in 0..targets {
        let center = loop {
            let c = rng.gen_range(0..pool.len());
            if !used[c] {
                break c;
            }
        };
        let dist = |i: usize| -> f64 { vecs[i].iter().zip(&vecs[center]).map(|(a, b)| (a - b) * (a - b)).sum() };
        let mut order: Vec<usize> = (0..pool.len()).filter(|&i| !used[i]).collect();
        order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
        let act: Vec<usize> = order[..actives.min(order.len())].to_vec();
        let far_start = (pool.len() / 10).max(actives).min(order.len());
        let far = &order[far_start..];
        let dec: Vec<usize> = rand::seq::index::sample(&mut rng, far.len(), decoys.min(far.len()))
            .into_iter()
            .map(|k| far[k])
            .collect();
        for &i in act.iter().chain(&dec) {
            used[i] = true;
        }
        out.push(ScreeningDataset {
            target: format!("target{t}"),
            actives: act.iter().map(|&i| pool[i].clone()).collect(),
            decoys: dec.iter().map(|&i| pool[i].clone()).collect(),
        });
    }
    out
}
