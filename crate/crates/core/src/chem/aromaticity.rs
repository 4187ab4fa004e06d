//! Hückel-style aromaticity perception over the smallest set of smallest
//! rings (and fused ring pairs), so Kekulé and lowercase spellings of one
//! molecule reduce to the same graph.

use super::element::Element;
use super::molecule::{Atom, Bond, BondOrder, Molecule};
use super::rings::{find_rings, ring_bonds};

/// Pi electrons an atom donates to a ring, or `None` if it cannot be part of
/// an aromatic ring.
fn pi_electrons(mol: &Molecule, v: usize, cyclic: &[bool]) -> Option<u32> {
    let atom = mol.atom(v);
    let doubles: Vec<(usize, usize)> = mol
        .neighbors(v)
        .iter()
        .copied()
        .filter(|&(_, b)| mol.bonds()[b].order == BondOrder::Double)
        .collect();
    let e = atom.element;
    if !matches!(e.symbol(), "B" | "C" | "N" | "O" | "P" | "S" | "Se" | "As" | "Te") {
        return None;
    }
    match doubles.as_slice() {
        [] => {}
        [(nb, b)] => {
            return if cyclic[*b] {
                Some(1)
            } else if e == Element::C
                && matches!(mol.atom(*nb).element.symbol(), "O" | "N" | "S")
            {
                Some(0)
            } else {
                None
            };
        }
        _ => return None,
    }
    let degree = mol.degree(v) + mol.implicit_hydrogens(v) as usize;
    let charge = atom.formal_charge;
    if atom.aromatic {
        return Some(match e.symbol() {
            "C" if charge < 0 => 2,
            "C" if charge > 0 => 0,
            "C" => 1,
            "B" => 0,
            "N" | "P" | "As" if charge == 0 && degree >= 3 => 2,
            "N" | "P" | "As" => 1,
            _ => 2,
        });
    }
    match (e.symbol(), charge) {
        ("N" | "P" | "As", 0) if degree == 3 => Some(2),
        ("O" | "S" | "Se" | "Te", 0) if degree == 2 => Some(2),
        ("C", -1) => Some(2),
        ("C", 1) => Some(0),
        ("B", 0) if degree == 3 => Some(0),
        _ => None,
    }
}

fn huckel(total: u32) -> bool {
    total >= 2 && (total - 2) % 4 == 0
}

/// Returns a copy of `mol` with aromatic rings flagged and their bonds set to
/// [`BondOrder::Aromatic`]. Hydrogen counts are preserved.
pub fn perceive_aromaticity(mol: &Molecule) -> Molecule {
    let rings = find_rings(mol);
    if rings.is_empty() {
        return mol.clone();
    }
    let cyclic = ring_bonds(mol, &rings);
    let electrons: Vec<Option<u32>> = (0..mol.atom_count()).map(|v| pi_electrons(mol, v, &cyclic)).collect();
    let ring_total = |atoms: &[usize]| -> Option<u32> {
        atoms.iter().map(|&a| electrons[a]).sum::<Option<u32>>()
    };

    let mut aromatic_ring = vec![false; rings.len()];
    for (i, r) in rings.iter().enumerate() {
        if let Some(t) = ring_total(&r.atoms) {
            aromatic_ring[i] = huckel(t);
        }
    }
    // fused pairs sharing exactly one bond, judged as one perimeter
    for i in 0..rings.len() {
        for j in (i + 1)..rings.len() {
            if aromatic_ring[i] && aromatic_ring[j] {
                continue;
            }
            let shared = rings[i].bonds.iter().filter(|b| rings[j].bonds.contains(b)).count();
            if shared != 1 {
                continue;
            }
            let mut atoms: Vec<usize> = rings[i].atoms.iter().chain(&rings[j].atoms).copied().collect();
            atoms.sort_unstable();
            atoms.dedup();
            if let Some(t) = ring_total(&atoms) {
                if huckel(t) {
                    aromatic_ring[i] = true;
                    aromatic_ring[j] = true;
                }
            }
        }
    }

    let mut atom_flag: Vec<bool> = mol.atoms().iter().map(|a| a.aromatic).collect();
    let mut bond_flag: Vec<bool> = mol.bonds().iter().map(|b| b.order == BondOrder::Aromatic).collect();
    let mut changed = false;
    for (i, r) in rings.iter().enumerate() {
        if !aromatic_ring[i] {
            continue;
        }
        for &a in &r.atoms {
            changed |= !atom_flag[a];
            atom_flag[a] = true;
        }
        for &b in &r.bonds {
            changed |= !bond_flag[b];
            bond_flag[b] = true;
        }
    }
    if !changed {
        return mol.clone();
    }
    let atoms: Vec<Atom> = mol
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| Atom {
            aromatic: atom_flag[i],
            explicit_h: Some(mol.implicit_hydrogens(i)),
            ..a.clone()
        })
        .collect();
    let bonds: Vec<Bond> = mol
        .bonds()
        .iter()
        .enumerate()
        .map(|(i, b)| Bond {
            order: if bond_flag[i] { BondOrder::Aromatic } else { b.order },
            ..b.clone()
        })
        .collect();
    Molecule::with_stereo_order(atoms, bonds, Some(mol.stereo_orders().to_vec()))
        .expect("aromatized graph stays valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn aromatic_atoms(s: &str) -> usize {
        let m = perceive_aromaticity(&parse_smiles(s).unwrap());
        m.atoms().iter().filter(|a| a.aromatic).count()
    }

    #[test]
    fn kekule_rings() {
        assert_eq!(aromatic_atoms("C1=CC=CC=C1"), 6);
        assert_eq!(aromatic_atoms("C1=CC=C2C=CC=CC2=C1"), 10);
        assert_eq!(aromatic_atoms("C1=CC=C2C(=C1)C=CN2"), 9);
        assert_eq!(aromatic_atoms("O=C1C=CC=CN1"), 6);
        assert_eq!(aromatic_atoms("C1=CSC=C1"), 5);
        assert_eq!(aromatic_atoms("C1=CC=NC=C1"), 6);
        assert_eq!(aromatic_atoms("CN1C=NC2=C1C(=O)N(C(=O)N2C)C"), 9);
    }

    #[test]
    fn non_aromatic_rings() {
        assert_eq!(aromatic_atoms("O=C1C=CC(=O)C=C1"), 0);
        assert_eq!(aromatic_atoms("C1=CCC=C1"), 0);
        assert_eq!(aromatic_atoms("C1=CC=CC=CC=C1"), 0);
        assert_eq!(aromatic_atoms("C1CCCCC1"), 0);
        assert_eq!(aromatic_atoms("C=C1C=CC=C1"), 0);
    }

    #[test]
    fn hydrogens_preserved() {
        let m = perceive_aromaticity(&parse_smiles("C1=CC=C2C(=C1)C=CN2").unwrap());
        let n = (0..m.atom_count()).find(|&i| m.atom(i).element == Element::N).unwrap();
        assert_eq!(m.implicit_hydrogens(n), 1);
        let total: u32 = (0..m.atom_count()).map(|i| m.implicit_hydrogens(i) as u32).sum();
        assert_eq!(total, 7);
    }
}
