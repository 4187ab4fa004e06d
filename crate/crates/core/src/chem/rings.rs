//! Smallest set of smallest rings via Horton candidate cycles and GF(2)
//! elimination.

use std::collections::{HashSet, VecDeque};

use super::molecule::{BondOrder, Molecule};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ring {
    pub atoms: Vec<usize>,
    pub bonds: Vec<usize>,
}

impl Ring {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_aromatic(&self, mol: &Molecule) -> bool {
        self.bonds
            .iter()
            .all(|&b| mol.bonds()[b].order == BondOrder::Aromatic)
    }
}

/// Number of independent cycles: bonds − atoms + components.
pub fn cyclomatic_number(mol: &Molecule) -> usize {
    (mol.bonds().len() + mol.components().len()).saturating_sub(mol.atom_count())
}

type BitSet = Vec<u64>;

fn bitset(bonds: &[usize], words: usize) -> BitSet {
    let mut s = vec![0u64; words];
    for &b in bonds {
        s[b / 64] |= 1 << (b % 64);
    }
    s
}

fn leading_bit(s: &BitSet) -> Option<usize> {
    s.iter()
        .enumerate()
        .rev()
        .find(|(_, &w)| w != 0)
        .map(|(i, &w)| i * 64 + 63 - w.leading_zeros() as usize)
}

fn bfs_tree(mol: &Molecule, root: usize) -> Vec<Option<(usize, usize)>> {
    let mut parent = vec![None; mol.atom_count()];
    let mut seen = vec![false; mol.atom_count()];
    seen[root] = true;
    let mut q = VecDeque::from([root]);
    while let Some(v) = q.pop_front() {
        for &(nb, bi) in mol.neighbors(v) {
            if !seen[nb] {
                seen[nb] = true;
                parent[nb] = Some((v, bi));
                q.push_back(nb);
            }
        }
    }
    parent
}

fn path_to_root(parent: &[Option<(usize, usize)>], mut v: usize) -> (Vec<usize>, Vec<usize>) {
    let mut atoms = vec![v];
    let mut bonds = Vec::new();
    while let Some((p, b)) = parent[v] {
        atoms.push(p);
        bonds.push(b);
        v = p;
    }
    (atoms, bonds)
}

/// Minimum cycle basis of the molecular graph (the usual SSSR).
pub fn find_rings(mol: &Molecule) -> Vec<Ring> {
    let target = cyclomatic_number(mol);
    if target == 0 {
        return Vec::new();
    }
    let words = mol.bonds().len().div_ceil(64);
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    let mut seen_sets: HashSet<Vec<usize>> = HashSet::new();
    for root in 0..mol.atom_count() {
        if mol.degree(root) < 2 {
            continue;
        }
        let parent = bfs_tree(mol, root);
        for (bi, bond) in mol.bonds().iter().enumerate() {
            let (x, y) = (bond.a, bond.b);
            if parent[x].map(|p| p.1) == Some(bi) || parent[y].map(|p| p.1) == Some(bi) {
                continue;
            }
            if (x != root && parent[x].is_none()) || (y != root && parent[y].is_none()) {
                continue;
            }
            let (ax, bx) = path_to_root(&parent, x);
            let (ay, by) = path_to_root(&parent, y);
            let sx: HashSet<usize> = ax.iter().copied().collect();
            if ay.iter().filter(|a| sx.contains(a)).count() != 1 {
                continue;
            }
            let mut cyc: Vec<usize> = bx.iter().chain(by.iter()).copied().collect();
            cyc.push(bi);
            cyc.sort_unstable();
            if seen_sets.insert(cyc.clone()) {
                candidates.push(cyc);
            }
        }
    }
    candidates.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));

    let mut basis: Vec<(usize, BitSet)> = Vec::new();
    let mut rings = Vec::new();
    for cyc in candidates {
        let mut v = bitset(&cyc, words);
        loop {
            let Some(lead) = leading_bit(&v) else { break };
            match basis.iter().find(|(p, _)| *p == lead) {
                Some((_, row)) => {
                    for (w, r) in v.iter_mut().zip(row) {
                        *w ^= r;
                    }
                }
                None => break,
            }
        }
        if let Some(lead) = leading_bit(&v) {
            basis.push((lead, v));
            rings.push(ring_from_bonds(mol, &cyc));
            if rings.len() == target {
                break;
            }
        }
    }
    rings
}

fn ring_from_bonds(mol: &Molecule, bonds: &[usize]) -> Ring {
    // walk the cycle to list atoms in ring order
    let start = mol.bonds()[bonds[0]].a;
    let mut atoms = vec![start];
    let mut used = vec![false; bonds.len()];
    let mut cur = start;
    for _ in 1..bonds.len() {
        let (k, next) = bonds
            .iter()
            .enumerate()
            .filter(|&(k, _)| !used[k])
            .find_map(|(k, &b)| {
                let bond = &mol.bonds()[b];
                if bond.a == cur {
                    Some((k, bond.b))
                } else if bond.b == cur {
                    Some((k, bond.a))
                } else {
                    None
                }
            })
            .expect("bonds form a cycle");
        used[k] = true;
        atoms.push(next);
        cur = next;
    }
    Ring {
        atoms,
        bonds: bonds.to_vec(),
    }
}

/// Per-bond flag: whether the bond lies on any cycle.
pub fn ring_bonds(mol: &Molecule, rings: &[Ring]) -> Vec<bool> {
    let mut flags = vec![false; mol.bonds().len()];
    for r in rings {
        for &b in &r.bonds {
            flags[b] = true;
        }
    }
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn ring_sizes(s: &str) -> Vec<usize> {
        let m = parse_smiles(s).unwrap();
        let mut v: Vec<usize> = find_rings(&m).iter().map(|r| r.len()).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn common_ring_systems() {
        assert_eq!(ring_sizes("CCO"), Vec::<usize>::new());
        assert_eq!(ring_sizes("c1ccccc1"), vec![6]);
        assert_eq!(ring_sizes("c1ccc2ccccc2c1"), vec![6, 6]);
        assert_eq!(ring_sizes("C1CC2CCC1C2"), vec![5, 5]);
        assert_eq!(ring_sizes("C12C3C4C1C5C2C3C45"), vec![4, 4, 4, 4, 4]);
        assert_eq!(ring_sizes("c1ccc2[nH]ccc2c1"), vec![5, 6]);
        assert_eq!(ring_sizes("C1CC1.C1CCC1"), vec![3, 4]);
    }

    #[test]
    fn aromatic_flags() {
        let m = parse_smiles("c1ccccc1C1CCCCC1").unwrap();
        let rings = find_rings(&m);
        let aromatic: Vec<bool> = rings.iter().map(|r| r.is_aromatic(&m)).collect();
        assert_eq!(aromatic.iter().filter(|&&a| a).count(), 1);
        let flags = ring_bonds(&m, &rings);
        assert_eq!(flags.iter().filter(|&&f| !f).count(), 1);
    }
}
