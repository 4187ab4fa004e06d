use serde::{Deserialize, Serialize};

use super::element::Element;
use super::SmilesError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chirality {
    /// `@`: neighbors viewed from the first one appear anticlockwise.
    Anticlockwise,
    /// `@@`
    Clockwise,
}

impl Chirality {
    pub fn inverted(self) -> Chirality {
        match self {
            Chirality::Anticlockwise => Chirality::Clockwise,
            Chirality::Clockwise => Chirality::Anticlockwise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub formal_charge: i8,
    pub isotope: Option<u16>,
    /// Hydrogen count written inside brackets; `Some` iff the atom was a bracket atom.
    pub explicit_h: Option<u8>,
    pub chirality: Option<Chirality>,
}

impl Atom {
    pub fn organic(element: Element, aromatic: bool) -> Atom {
        Atom {
            element,
            aromatic,
            formal_charge: 0,
            isotope: None,
            explicit_h: None,
            chirality: None,
        }
    }

    pub fn is_bracket(&self) -> bool {
        self.explicit_h.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to an atom's bond-order sum, in half units.
    pub fn half_units(self) -> u32 {
        match self {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.half_units() as f64 / 2.0
    }
}

/// Directional marker of a single bond adjacent to a double bond, read from
/// `a` towards `b` (`/` is up, `\` is down).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondStereo {
    Up,
    Down,
}

impl BondStereo {
    pub fn flipped(self) -> BondStereo {
        match self {
            BondStereo::Up => BondStereo::Down,
            BondStereo::Down => BondStereo::Up,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub stereo: Option<BondStereo>,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

/// One entry of the neighbor ordering that a chirality tag refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StereoNeighbor {
    Atom(usize),
    /// The hydrogen written inside the atom's brackets.
    ImplicitH,
}

/// Attributed molecular graph.
#[derive(Debug, Clone)]
pub struct Molecule {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
    hydrogens: Vec<u8>,
    /// Neighbor order in which each chiral atom's tag was written.
    stereo_order: Vec<Vec<StereoNeighbor>>,
}

impl Molecule {
    /// Builds a molecule, validating bond endpoints and computing implicit hydrogens.
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Molecule, SmilesError> {
        Self::with_stereo_order(atoms, bonds, None)
    }

    pub(crate) fn with_stereo_order(
        atoms: Vec<Atom>,
        bonds: Vec<Bond>,
        stereo_order: Option<Vec<Vec<StereoNeighbor>>>,
    ) -> Result<Molecule, SmilesError> {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a >= n || bond.b >= n {
                return Err(SmilesError::InvalidGraph(format!(
                    "bond {i} references a missing atom"
                )));
            }
            if bond.a == bond.b {
                return Err(SmilesError::InvalidGraph(format!("bond {i} is a self loop")));
            }
            if adjacency[bond.a].iter().any(|&(nb, _)| nb == bond.b) {
                return Err(SmilesError::InvalidGraph(format!(
                    "duplicate bond between atoms {} and {}",
                    bond.a, bond.b
                )));
            }
            if bond.order == BondOrder::Aromatic && !(atoms[bond.a].aromatic && atoms[bond.b].aromatic)
            {
                return Err(SmilesError::InvalidGraph(format!(
                    "aromatic bond between non-aromatic atoms {} and {}",
                    bond.a, bond.b
                )));
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        let stereo_order = match stereo_order {
            Some(order) => order,
            None => (0..n)
                .map(|i| {
                    let mut order = Vec::new();
                    if atoms[i].explicit_h.unwrap_or(0) > 0 && !adjacency[i].is_empty() {
                        order.push(StereoNeighbor::Atom(adjacency[i][0].0));
                        order.push(StereoNeighbor::ImplicitH);
                        order.extend(adjacency[i][1..].iter().map(|&(nb, _)| StereoNeighbor::Atom(nb)));
                    } else {
                        if atoms[i].explicit_h.unwrap_or(0) > 0 {
                            order.push(StereoNeighbor::ImplicitH);
                        }
                        order.extend(adjacency[i].iter().map(|&(nb, _)| StereoNeighbor::Atom(nb)));
                    }
                    order
                })
                .collect(),
        };
        let mut mol = Molecule {
            atoms,
            bonds,
            adjacency,
            hydrogens: Vec::new(),
            stereo_order,
        };
        let mut hydrogens = Vec::with_capacity(n);
        for i in 0..n {
            hydrogens.push(mol.compute_hydrogens(i)?);
        }
        mol.hydrogens = hydrogens;
        Ok(mol)
    }

    fn compute_hydrogens(&self, idx: usize) -> Result<u8, SmilesError> {
        let atom = &self.atoms[idx];
        if let Some(h) = atom.explicit_h {
            return Ok(h);
        }
        let half = self.bond_order_half_sum(idx);
        organic_hydrogens(atom.element, atom.aromatic, half).ok_or_else(|| SmilesError::Valence {
            atom: idx,
            element: atom.element.symbol().to_string(),
            bond_order_sum: half / 2,
        })
    }

    /// Sum of bond orders at an atom, in half units (aromatic = 3).
    pub fn bond_order_half_sum(&self, idx: usize) -> u32 {
        self.adjacency[idx]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.half_units())
            .sum()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, idx: usize) -> &Atom {
        &self.atoms[idx]
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// `(neighbor, bond index)` pairs in insertion order.
    pub fn neighbors(&self, idx: usize) -> &[(usize, usize)] {
        &self.adjacency[idx]
    }

    pub fn degree(&self, idx: usize) -> usize {
        self.adjacency[idx].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    /// Hydrogens carried by an atom that are not separate graph nodes:
    /// the bracket count, or the valence-table fill for organic-subset atoms.
    pub fn implicit_hydrogens(&self, idx: usize) -> u8 {
        self.hydrogens[idx]
    }

    /// Implicit hydrogens plus explicit `[H]` neighbors.
    pub fn total_hydrogens(&self, idx: usize) -> u32 {
        self.hydrogens[idx] as u32
            + self.adjacency[idx]
                .iter()
                .filter(|&&(nb, _)| self.atoms[nb].element.is_hydrogen())
                .count() as u32
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| !a.element.is_hydrogen()).count()
    }

    pub(crate) fn stereo_order(&self, idx: usize) -> &[StereoNeighbor] {
        &self.stereo_order[idx]
    }

    pub(crate) fn stereo_orders(&self) -> &[Vec<StereoNeighbor>] {
        &self.stereo_order
    }

    /// Connected components as sorted atom-index lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                let v = comp[i];
                i += 1;
                for &(nb, _) in &self.adjacency[v] {
                    if !seen[nb] {
                        seen[nb] = true;
                        comp.push(nb);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Returns a copy with atom `i` moved to position `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Molecule {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = vec![None; self.atoms.len()];
        for (i, atom) in self.atoms.iter().enumerate() {
            atoms[perm[i]] = Some(atom.clone());
        }
        let atoms: Vec<Atom> = atoms.into_iter().map(|a| a.expect("permutation")).collect();
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                order: b.order,
                stereo: b.stereo,
            })
            .collect();
        let mut stereo_order = vec![Vec::new(); self.atoms.len()];
        for (i, order) in self.stereo_order.iter().enumerate() {
            stereo_order[perm[i]] = order
                .iter()
                .map(|s| match *s {
                    StereoNeighbor::Atom(a) => StereoNeighbor::Atom(perm[a]),
                    StereoNeighbor::ImplicitH => StereoNeighbor::ImplicitH,
                })
                .collect();
        }
        Molecule::with_stereo_order(atoms, bonds, Some(stereo_order))
            .expect("relabeling preserves validity")
    }
}

/// Hydrogens an unbracketed atom receives from the valence table, given its
/// bond-order sum in half units. Aromatic bonds count 1.5 and the sum is
/// rounded down. Aliphatic atoms take the smallest default valence that fits
/// (`None` if none does); aromatic atoms use their lowest valence, clamped at 0.
pub fn organic_hydrogens(element: Element, aromatic: bool, half_sum: u32) -> Option<u8> {
    let valences = element.default_valences();
    let sum = half_sum / 2;
    if valences.is_empty() {
        return None;
    }
    if aromatic {
        return Some((valences[0] as u32).saturating_sub(sum) as u8);
    }
    valences
        .iter()
        .find(|&&v| v as u32 >= sum)
        .map(|&v| (v as u32 - sum) as u8)
}

/// Implicit hydrogen count of one atom (see [`Molecule::implicit_hydrogens`]).
pub fn implicit_hydrogens(mol: &Molecule, atom_index: usize) -> u8 {
    mol.implicit_hydrogens(atom_index)
}
