//! Graph-computable physicochemical descriptors and the empirical-CDF
//! normalizer that turns them into regression targets in [0, 1].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{find_rings, perceive_aromaticity, ring_bonds, BondOrder, Element, Molecule};

/// Per-descriptor reservoir capacity used by [`fit_normalizer`].
pub const RESERVOIR_SIZE: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DescriptorError {
    #[error("unknown descriptor '{0}'")]
    Unknown(String),
    #[error("unknown descriptor set '{0}'")]
    UnknownSet(String),
    #[error("descriptor '{0}' listed twice")]
    Duplicate(String),
    #[error("descriptor set is empty")]
    EmptySet,
    #[error("normalizer needs at least 2 molecules, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

macro_rules! descriptors {
    ($($id:ident),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum DescriptorId { $($id),* }

        impl DescriptorId {
            pub const ALL: &'static [DescriptorId] = &[$(DescriptorId::$id),*];

            pub fn name(self) -> &'static str {
                match self { $(DescriptorId::$id => stringify!($id)),* }
            }
        }
    };
}

descriptors!(
    MolWt,
    ExactMolWt,
    HeavyAtomCount,
    HeavyAtomMolWt,
    RingCount,
    NumAromaticRings,
    NumAliphaticRings,
    NumHAcceptors,
    NumHDonors,
    NumRotatableBonds,
    NumHeteroatoms,
    NHOHCount,
    NOCount,
    FractionCSP3,
    NumValenceElectrons,
    Chi0,
);

impl fmt::Display for DescriptorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DescriptorId {
    type Err = DescriptorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DescriptorId::ALL
            .iter()
            .copied()
            .find(|d| d.name() == s)
            .ok_or_else(|| DescriptorError::Unknown(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SetName {
    AllImplemented,
    Simple,
    Graph,
    FragmentCounts,
    DruglikenessCore,
    Custom,
}

impl SetName {
    pub fn as_str(self) -> &'static str {
        match self {
            SetName::AllImplemented => "ALL_IMPLEMENTED",
            SetName::Simple => "SIMPLE",
            SetName::Graph => "GRAPH",
            SetName::FragmentCounts => "FRAGMENT_COUNTS",
            SetName::DruglikenessCore => "DRUGLIKENESS_CORE",
            SetName::Custom => "custom",
        }
    }
}

/// Ordered, duplicate-free list of descriptors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DescriptorSet {
    pub name: SetName,
    members: Vec<DescriptorId>,
}

impl DescriptorSet {
    pub fn named(name: SetName) -> DescriptorSet {
        use DescriptorId::*;
        let members: Vec<DescriptorId> = match name {
            SetName::AllImplemented | SetName::Custom => DescriptorId::ALL.to_vec(),
            // the named groupings restricted to what the registry implements
            SetName::Simple => vec![MolWt, NumHAcceptors, NumHDonors, NumRotatableBonds, FractionCSP3],
            SetName::Graph => vec![Chi0],
            SetName::FragmentCounts => vec![
                RingCount,
                NumAromaticRings,
                NumAliphaticRings,
                NumHAcceptors,
                NumHDonors,
                NumRotatableBonds,
                NumHeteroatoms,
                NHOHCount,
                NOCount,
            ],
            SetName::DruglikenessCore => vec![
                MolWt,
                ExactMolWt,
                HeavyAtomCount,
                RingCount,
                NumAromaticRings,
                NumAliphaticRings,
                NumHAcceptors,
                NumHDonors,
                NumRotatableBonds,
                NumHeteroatoms,
                NHOHCount,
                NOCount,
                FractionCSP3,
            ],
        };
        DescriptorSet { name, members }
    }

    pub fn all() -> DescriptorSet {
        DescriptorSet::named(SetName::AllImplemented)
    }

    pub fn custom(members: Vec<DescriptorId>) -> Result<DescriptorSet, DescriptorError> {
        if members.is_empty() {
            return Err(DescriptorError::EmptySet);
        }
        for (i, m) in members.iter().enumerate() {
            if members[..i].contains(m) {
                return Err(DescriptorError::Duplicate(m.name().into()));
            }
        }
        Ok(DescriptorSet {
            name: SetName::Custom,
            members,
        })
    }

    /// Accepts a set name (`SIMPLE`, ...) or a comma-separated list of
    /// descriptor ids.
    pub fn parse(spec: &str) -> Result<DescriptorSet, DescriptorError> {
        let named = [
            SetName::AllImplemented,
            SetName::Simple,
            SetName::Graph,
            SetName::FragmentCounts,
            SetName::DruglikenessCore,
        ];
        if let Some(n) = named.iter().find(|n| n.as_str().eq_ignore_ascii_case(spec.trim())) {
            return Ok(DescriptorSet::named(*n));
        }
        if !spec.contains(',') && spec.chars().all(|c| c.is_ascii_uppercase() || c == '_') {
            return Err(DescriptorError::UnknownSet(spec.to_string()));
        }
        let ids = spec
            .split(',')
            .map(|s| s.trim().parse())
            .collect::<Result<Vec<DescriptorId>, _>>()?;
        DescriptorSet::custom(ids)
    }

    pub fn members(&self) -> &[DescriptorId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

impl Default for DescriptorSet {
    fn default() -> Self {
        DescriptorSet::all()
    }
}

/// Values aligned with a [`DescriptorSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorVector {
    pub values: Vec<f64>,
}

fn is_amide_cn(mol: &Molecule, c: usize, n: usize) -> bool {
    mol.atom(c).element == Element::C
        && mol.atom(n).element == Element::N
        && mol.neighbors(c).iter().any(|&(nb, b)| {
            mol.bonds()[b].order == BondOrder::Double && mol.atom(nb).element == Element::O
        })
}

fn heavy_degree(mol: &Molecule, v: usize) -> usize {
    mol.neighbors(v)
        .iter()
        .filter(|&&(nb, _)| !mol.atom(nb).element.is_hydrogen())
        .count()
}

fn mass(mol: &Molecule, v: usize, exact: bool) -> f64 {
    let a = mol.atom(v);
    match a.isotope {
        Some(iso) => iso as f64,
        None if exact => a.element.monoisotopic_mass(),
        None => a.element.atomic_weight(),
    }
}

/// Sum in sorted order so the result does not depend on atom numbering.
fn order_free_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.iter().sum()
}

/// Every registered descriptor, in [`DescriptorId::ALL`] order.
pub fn compute_all(mol: &Molecule) -> Vec<f64> {
    let mol = &perceive_aromaticity(mol);
    let n = mol.atom_count();
    let heavy: Vec<usize> = (0..n).filter(|&v| !mol.atom(v).element.is_hydrogen()).collect();
    let implicit_h: f64 = (0..n).map(|v| mol.implicit_hydrogens(v) as f64).sum();

    let heavy_wt = order_free_sum(heavy.iter().map(|&v| mass(mol, v, false)).collect());
    let all_atoms_wt = order_free_sum((0..n).map(|v| mass(mol, v, false)).collect());
    let mol_wt = all_atoms_wt + implicit_h * Element::H.atomic_weight();
    let exact_wt =
        order_free_sum((0..n).map(|v| mass(mol, v, true)).collect()) + implicit_h * Element::H.monoisotopic_mass();

    let rings = find_rings(mol);
    let aromatic_rings = rings.iter().filter(|r| r.is_aromatic(mol)).count();
    let cyclic = ring_bonds(mol, &rings);

    let is_el = |v: usize, e: Element| mol.atom(v).element == e;
    let n_or_o = |v: usize| is_el(v, Element::N) || is_el(v, Element::O);
    let no_count = heavy.iter().filter(|&&v| n_or_o(v)).count();
    let donors = heavy.iter().filter(|&&v| n_or_o(v) && mol.total_hydrogens(v) > 0).count();
    let nhoh: u32 = heavy.iter().filter(|&&v| n_or_o(v)).map(|&v| mol.total_hydrogens(v)).sum();
    let hetero = heavy.iter().filter(|&&v| !is_el(v, Element::C)).count();

    let rotatable = mol
        .bonds()
        .iter()
        .enumerate()
        .filter(|&(i, b)| {
            b.order == BondOrder::Single
                && !cyclic[i]
                && !mol.atom(b.a).element.is_hydrogen()
                && !mol.atom(b.b).element.is_hydrogen()
                && heavy_degree(mol, b.a) >= 2
                && heavy_degree(mol, b.b) >= 2
                && !is_amide_cn(mol, b.a, b.b)
                && !is_amide_cn(mol, b.b, b.a)
        })
        .count();

    let carbons: Vec<usize> = heavy.iter().copied().filter(|&v| is_el(v, Element::C)).collect();
    let sp3 = carbons
        .iter()
        .filter(|&&v| {
            !mol.atom(v).aromatic && mol.neighbors(v).iter().all(|&(_, b)| mol.bonds()[b].order == BondOrder::Single)
        })
        .count();
    let fraction_csp3 = if carbons.is_empty() {
        0.0
    } else {
        sp3 as f64 / carbons.len() as f64
    };

    let valence_electrons: f64 = (0..n)
        .map(|v| {
            let a = mol.atom(v);
            a.element.valence_electrons() as f64 + mol.implicit_hydrogens(v) as f64 - a.formal_charge as f64
        })
        .sum();

    let chi0 = order_free_sum(
        heavy
            .iter()
            .map(|&v| heavy_degree(mol, v))
            .filter(|&d| d > 0)
            .map(|d| (d as f64).powf(-0.5))
            .collect(),
    );

    DescriptorId::ALL
        .iter()
        .map(|d| match d {
            DescriptorId::MolWt => mol_wt,
            DescriptorId::ExactMolWt => exact_wt,
            DescriptorId::HeavyAtomCount => heavy.len() as f64,
            DescriptorId::HeavyAtomMolWt => heavy_wt,
            DescriptorId::RingCount => rings.len() as f64,
            DescriptorId::NumAromaticRings => aromatic_rings as f64,
            DescriptorId::NumAliphaticRings => (rings.len() - aromatic_rings) as f64,
            DescriptorId::NumHAcceptors => no_count as f64,
            DescriptorId::NumHDonors => donors as f64,
            DescriptorId::NumRotatableBonds => rotatable as f64,
            DescriptorId::NumHeteroatoms => hetero as f64,
            DescriptorId::NHOHCount => nhoh as f64,
            DescriptorId::NOCount => no_count as f64,
            DescriptorId::FractionCSP3 => fraction_csp3,
            DescriptorId::NumValenceElectrons => valence_electrons,
            DescriptorId::Chi0 => chi0,
        })
        .collect()
}

pub fn compute_descriptors(mol: &Molecule, set: &DescriptorSet) -> DescriptorVector {
    let all = compute_all(mol);
    DescriptorVector {
        values: set.members().iter().map(|&d| all[d as usize]).collect(),
    }
}

/// Sorted per-descriptor samples defining an empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub set: DescriptorSet,
    pub samples: Vec<Vec<f64>>,
}

/// Fits a normalizer, keeping a uniform reservoir of at most
/// [`RESERVOIR_SIZE`] values per descriptor.
pub fn fit_normalizer<I>(set: &DescriptorSet, corpus: I, seed: u64) -> Result<Normalizer, DescriptorError>
where
    I: IntoIterator<Item = DescriptorVector>,
{
    fit_normalizer_with_capacity(set, corpus, seed, RESERVOIR_SIZE)
}

pub fn fit_normalizer_with_capacity<I>(
    set: &DescriptorSet,
    corpus: I,
    seed: u64,
    capacity: usize,
) -> Result<Normalizer, DescriptorError>
where
    I: IntoIterator<Item = DescriptorVector>,
{
    let dim = set.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); dim];
    let mut seen = 0usize;
    for v in corpus {
        if v.values.len() != dim {
            return Err(DescriptorError::DimensionMismatch {
                expected: dim,
                got: v.values.len(),
            });
        }
        seen += 1;
        if seen <= capacity {
            for (s, x) in samples.iter_mut().zip(&v.values) {
                s.push(*x);
            }
        } else {
            // one draw per molecule keeps descriptor rows together
            let j = rng.gen_range(0..seen);
            if j < capacity {
                for (s, x) in samples.iter_mut().zip(&v.values) {
                    s[j] = *x;
                }
            }
        }
    }
    if seen < 2 {
        return Err(DescriptorError::TooFewSamples(seen));
    }
    for s in &mut samples {
        s.sort_by(f64::total_cmp);
    }
    Ok(Normalizer {
        set: set.clone(),
        samples,
    })
}

/// Empirical CDF of `x` against a sorted sample: sample point `i` maps to
/// `i/(n-1)` (runs of equal values to their midpoint), linear in between,
/// clamped outside.
pub fn empirical_cdf(sample: &[f64], x: f64) -> f64 {
    let n = sample.len();
    if n < 2 || sample[0] == sample[n - 1] {
        return 0.5;
    }
    let last = (n - 1) as f64;
    if x <= sample[0] {
        return if x == sample[0] {
            let hi = sample.partition_point(|&s| s <= x) - 1;
            hi as f64 / 2.0 / last
        } else {
            0.0
        };
    }
    if x >= sample[n - 1] {
        return if x == sample[n - 1] {
            let lo = sample.partition_point(|&s| s < x);
            (lo as f64 + last) / 2.0 / last
        } else {
            1.0
        };
    }
    let lo = sample.partition_point(|&s| s < x);
    let hi = sample.partition_point(|&s| s <= x);
    if hi > lo {
        return (lo + hi - 1) as f64 / 2.0 / last;
    }
    // sample[lo-1] < x < sample[lo]
    let (a, b) = (sample[lo - 1], sample[lo]);
    ((lo - 1) as f64 + (x - a) / (b - a)) / last
}

impl Normalizer {
    pub fn dim(&self) -> usize {
        self.samples.len()
    }

    pub fn normalize(&self, v: &DescriptorVector) -> Result<Vec<f64>, DescriptorError> {
        if v.values.len() != self.dim() {
            return Err(DescriptorError::DimensionMismatch {
                expected: self.dim(),
                got: v.values.len(),
            });
        }
        Ok(self
            .samples
            .iter()
            .zip(&v.values)
            .map(|(s, &x)| empirical_cdf(s, x))
            .collect())
    }

    /// Descriptors of `mol` mapped into [0, 1].
    pub fn targets(&self, mol: &Molecule) -> Vec<f64> {
        self.normalize(&compute_descriptors(mol, &self.set))
            .expect("normalizer set matches its own samples")
    }
}

pub fn normalize(v: &DescriptorVector, n: &Normalizer) -> Result<Vec<f64>, DescriptorError> {
    n.normalize(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use approx::assert_abs_diff_eq;

    fn desc(s: &str, d: DescriptorId) -> f64 {
        compute_all(&parse_smiles(s).unwrap())[d as usize]
    }

    #[test]
    fn ethanol() {
        use DescriptorId::*;
        assert_eq!(desc("CCO", HeavyAtomCount), 3.0);
        assert_eq!(desc("CCO", NumHeteroatoms), 1.0);
        assert_eq!(desc("CCO", NumHDonors), 1.0);
        assert_eq!(desc("CCO", RingCount), 0.0);
        // 2 C + 1 O + 6 H with standard weights
        let oracle = 2.0 * 12.011 + 15.999 + 6.0 * 1.008;
        assert_abs_diff_eq!(desc("CCO", MolWt), oracle, epsilon = 1e-9);
        assert_abs_diff_eq!(desc("CCO", MolWt), 46.069, epsilon = 1e-3);
        assert_abs_diff_eq!(desc("CCO", NumValenceElectrons), 20.0);
        assert_abs_diff_eq!(desc("CCO", Chi0), 1.0 + 2f64.powf(-0.5) + 1.0, epsilon = 1e-12);
    }

    #[test]
    fn benzene() {
        use DescriptorId::*;
        for s in ["c1ccccc1", "C1=CC=CC=C1"] {
            assert_eq!(desc(s, NumAromaticRings), 1.0);
            assert_eq!(desc(s, NumAliphaticRings), 0.0);
            assert_eq!(desc(s, FractionCSP3), 0.0);
            assert_abs_diff_eq!(desc(s, Chi0), 6.0 * 2f64.powf(-0.5), epsilon = 1e-12);
            assert_abs_diff_eq!(desc(s, Chi0), 4.2426, epsilon = 1e-4);
        }
        assert_eq!(desc("C1CCCCC1", FractionCSP3), 1.0);
    }

    #[test]
    fn rotatable_bonds() {
        use DescriptorId::NumRotatableBonds as R;
        assert_eq!(desc("CC", R), 0.0);
        assert_eq!(desc("CCCC", R), 1.0);
        assert_eq!(desc("CC(=O)NC", R), 0.0);
        assert_eq!(desc("c1ccccc1Cc1ccccc1", R), 2.0);
        assert_eq!(desc("[H]OCC", R), 0.0);
    }

    #[test]
    fn donors_and_nhoh() {
        use DescriptorId::*;
        assert_eq!(desc("NCC(=O)O", NumHDonors), 2.0);
        assert_eq!(desc("NCC(=O)O", NHOHCount), 3.0);
        assert_eq!(desc("NCC(=O)O", NumHAcceptors), 3.0);
        assert_eq!(desc("c1cc[nH]c1", NumHDonors), 1.0);
    }

    #[test]
    fn set_parsing() {
        assert_eq!(DescriptorSet::parse("SIMPLE").unwrap().len(), 5);
        assert_eq!(DescriptorSet::parse("ALL_IMPLEMENTED").unwrap().len(), 16);
        let c = DescriptorSet::parse("MolWt, Chi0").unwrap();
        assert_eq!(c.members(), [DescriptorId::MolWt, DescriptorId::Chi0]);
        assert_eq!(
            DescriptorSet::parse("MolWt,TPSA"),
            Err(DescriptorError::Unknown("TPSA".into()))
        );
        assert!(matches!(DescriptorSet::parse("MolWt,MolWt"), Err(DescriptorError::Duplicate(_))));
        assert!(matches!(DescriptorSet::parse("SURFACE"), Err(DescriptorError::UnknownSet(_))));
    }

    #[test]
    fn cdf_examples() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_abs_diff_eq!(empirical_cdf(&s, 2.5), 0.5, epsilon = 1e-12);
        assert_eq!(empirical_cdf(&s, 1.0), 0.0);
        assert_eq!(empirical_cdf(&s, 4.0), 1.0);
        assert_eq!(empirical_cdf(&s, -3.0), 0.0);
        assert_eq!(empirical_cdf(&s, 9.0), 1.0);
        assert_eq!(empirical_cdf(&[1.0, 5.0, 9.0], 5.0), 0.5);
        assert_eq!(empirical_cdf(&[3.0, 3.0, 3.0], 100.0), 0.5);
        assert_eq!(empirical_cdf(&[1.0, 2.0, 2.0, 3.0], 2.0), 0.5);
    }

    #[test]
    fn normalizer_fit_and_errors() {
        let set = DescriptorSet::custom(vec![DescriptorId::MolWt]).unwrap();
        let one = vec![DescriptorVector { values: vec![1.0] }];
        assert_eq!(
            fit_normalizer(&set, one, 0),
            Err(DescriptorError::TooFewSamples(1))
        );
        let vs = (0..100).map(|i| DescriptorVector { values: vec![i as f64] });
        let n = fit_normalizer_with_capacity(&set, vs, 3, 10).unwrap();
        assert_eq!(n.samples[0].len(), 10);
        assert!(n.samples[0].windows(2).all(|w| w[0] <= w[1]));
        let bad = DescriptorVector { values: vec![1.0, 2.0] };
        assert!(matches!(n.normalize(&bad), Err(DescriptorError::DimensionMismatch { .. })));
    }
}
