//! Depth-first SMILES writer. The traversal is driven by a per-atom priority
//! (lower visits first), which is how canonical, random and input-order
//! spellings share one code path.

use std::fmt::Write as _;

use super::molecule::{organic_hydrogens, Atom, BondOrder, BondStereo, Chirality, Molecule, StereoNeighbor};

/// Writes the molecule in input atom order, keeping stereo marks.
pub fn write_smiles(mol: &Molecule) -> String {
    let priority: Vec<u64> = (0..mol.atom_count() as u64).collect();
    mol.components()
        .iter()
        .map(|comp| write_fragment(mol, comp[0], &priority, true))
        .collect::<Vec<_>>()
        .join(".")
}

struct RingEdge {
    bond: usize,
    open: usize,
    close: usize,
}

struct Traversal {
    /// Atoms in output order.
    order: Vec<usize>,
    parent: Vec<Option<(usize, usize)>>,
    children: Vec<Vec<(usize, usize)>>,
    rings: Vec<RingEdge>,
}

fn traverse(mol: &Molecule, start: usize, priority: &[u64]) -> Traversal {
    let n = mol.atom_count();
    let mut t = Traversal {
        order: Vec::new(),
        parent: vec![None; n],
        children: vec![Vec::new(); n],
        rings: Vec::new(),
    };
    let mut visited = vec![false; n];
    let mut bond_used = vec![false; mol.bonds().len()];
    // Explicit stack of (atom, sorted neighbors, cursor) to avoid deep recursion.
    let sorted = |v: usize| {
        let mut nbs: Vec<(usize, usize)> = mol.neighbors(v).to_vec();
        nbs.sort_by_key(|&(nb, _)| (priority[nb], nb));
        nbs
    };
    visited[start] = true;
    t.order.push(start);
    let mut stack = vec![(start, sorted(start), 0usize)];
    while let Some(frame) = stack.last_mut() {
        let (v, ref nbs, ref mut cursor) = *frame;
        if *cursor >= nbs.len() {
            stack.pop();
            continue;
        }
        let (nb, bi) = nbs[*cursor];
        *cursor += 1;
        if bond_used[bi] {
            continue;
        }
        bond_used[bi] = true;
        if visited[nb] {
            t.rings.push(RingEdge { bond: bi, open: nb, close: v });
        } else {
            visited[nb] = true;
            t.order.push(nb);
            t.parent[nb] = Some((v, bi));
            t.children[v].push((nb, bi));
            stack.push((nb, sorted(nb), 0));
        }
    }
    t
}

/// Writes the connected component containing `start`.
pub(crate) fn write_fragment(mol: &Molecule, start: usize, priority: &[u64], stereo: bool) -> String {
    let t = traverse(mol, start, priority);
    let position: Vec<usize> = {
        let mut p = vec![usize::MAX; mol.atom_count()];
        for (i, &a) in t.order.iter().enumerate() {
            p[a] = i;
        }
        p
    };

    // Ring bonds touching each atom, in the order their digits are written:
    // closures first (by opening position), then openings (by partner position).
    let mut ring_bonds: Vec<Vec<(usize, bool)>> = vec![Vec::new(); mol.atom_count()];
    for (ri, r) in t.rings.iter().enumerate() {
        ring_bonds[r.open].push((ri, true));
        ring_bonds[r.close].push((ri, false));
    }
    for (atom, list) in ring_bonds.iter_mut().enumerate() {
        list.sort_by_key(|&(ri, opening)| {
            let r = &t.rings[ri];
            let partner = if r.open == atom { r.close } else { r.open };
            (opening, position[partner])
        });
    }

    let mut out = String::new();
    let mut ring_digit: Vec<Option<u16>> = vec![None; t.rings.len()];
    let mut in_use: Vec<bool> = vec![false; 100];

    enum Step {
        Atom { atom: usize, branch: bool },
        Close,
    }
    let mut steps = vec![Step::Atom { atom: start, branch: false }];
    while let Some(step) = steps.pop() {
        let v = match step {
            Step::Close => {
                out.push(')');
                continue;
            }
            Step::Atom { atom, branch } => {
                if branch {
                    out.push('(');
                }
                atom
            }
        };
        if let Some((p, bi)) = t.parent[v] {
            out.push_str(bond_symbol(mol, bi, p, stereo));
        }

        // Neighbor order as written, for the chirality parity.
        let mut written: Vec<StereoNeighbor> = Vec::new();
        if let Some((p, _)) = t.parent[v] {
            written.push(StereoNeighbor::Atom(p));
        }
        let atom = mol.atom(v);
        let bracket = needs_bracket(mol, v, stereo);
        if bracket && mol.implicit_hydrogens(v) > 0 {
            written.push(StereoNeighbor::ImplicitH);
        }

        let mut ring_text = String::new();
        for &(ri, opening) in &ring_bonds[v] {
            let r = &t.rings[ri];
            let partner = if opening { r.close } else { r.open };
            written.push(StereoNeighbor::Atom(partner));
            let d = if opening {
                let d = (1..100u16).find(|&d| !in_use[d as usize]).expect("fewer than 100 open rings");
                in_use[d as usize] = true;
                ring_digit[ri] = Some(d);
                ring_text.push_str(bond_symbol(mol, r.bond, v, stereo));
                d
            } else {
                let d = ring_digit[ri].expect("ring opened before closing");
                in_use[d as usize] = false;
                d
            };
            if d < 10 {
                let _ = write!(ring_text, "{d}");
            } else {
                let _ = write!(ring_text, "%{d}");
            }
        }
        written.extend(t.children[v].iter().map(|&(c, _)| StereoNeighbor::Atom(c)));

        let chirality = if stereo {
            atom.chirality
                .and_then(|c| adjust_chirality(c, mol.stereo_order(v), &written))
        } else {
            None
        };
        write_atom(&mut out, mol, v, atom, bracket, chirality);
        out.push_str(&ring_text);

        if let Some((&(last, _), rest)) = t.children[v].split_last() {
            steps.push(Step::Atom { atom: last, branch: false });
            for &(c, _) in rest.iter().rev() {
                steps.push(Step::Close);
                steps.push(Step::Atom { atom: c, branch: true });
            }
        }
    }
    out
}

fn bond_symbol(mol: &Molecule, bond_index: usize, from: usize, stereo: bool) -> &'static str {
    let bond = &mol.bonds()[bond_index];
    match bond.order {
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic => "",
        BondOrder::Single => {
            if let (true, Some(dir)) = (stereo, bond.stereo) {
                let dir = if bond.a == from { dir } else { dir.flipped() };
                return match dir {
                    BondStereo::Up => "/",
                    BondStereo::Down => "\\",
                };
            }
            let other = bond.other(from);
            if mol.atom(from).aromatic && mol.atom(other).aromatic {
                "-"
            } else {
                ""
            }
        }
    }
}

fn needs_bracket(mol: &Molecule, idx: usize, stereo: bool) -> bool {
    let atom = mol.atom(idx);
    if !atom.element.is_organic_subset()
        || atom.formal_charge != 0
        || atom.isotope.is_some()
        || (stereo && atom.chirality.is_some())
    {
        return true;
    }
    if atom.aromatic && !matches!(atom.element.symbol(), "B" | "C" | "N" | "O" | "P" | "S") {
        return true;
    }
    organic_hydrogens(atom.element, atom.aromatic, mol.bond_order_half_sum(idx))
        != Some(mol.implicit_hydrogens(idx))
}

fn write_atom(out: &mut String, mol: &Molecule, idx: usize, atom: &Atom, bracket: bool, chirality: Option<Chirality>) {
    let symbol = if atom.aromatic {
        atom.element.symbol().to_ascii_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    if !bracket {
        out.push_str(&symbol);
        return;
    }
    out.push('[');
    if let Some(iso) = atom.isotope {
        let _ = write!(out, "{iso}");
    }
    out.push_str(&symbol);
    match chirality {
        Some(Chirality::Anticlockwise) => out.push('@'),
        Some(Chirality::Clockwise) => out.push_str("@@"),
        None => {}
    }
    match mol.implicit_hydrogens(idx) {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    out.push(']');
}

/// Re-expresses a chirality tag relative to a new neighbor order. Returns
/// `None` when the two orders do not list the same neighbors.
fn adjust_chirality(tag: Chirality, original: &[StereoNeighbor], written: &[StereoNeighbor]) -> Option<Chirality> {
    if original.len() != written.len() {
        return None;
    }
    let mut perm: Vec<usize> = Vec::with_capacity(written.len());
    for w in written {
        perm.push(original.iter().position(|o| o == w)?);
    }
    // parity by cycle decomposition
    let mut seen = vec![false; perm.len()];
    let mut transpositions = 0;
    for i in 0..perm.len() {
        if seen[i] {
            continue;
        }
        let mut j = i;
        let mut len = 0;
        while !seen[j] {
            seen[j] = true;
            j = perm[j];
            len += 1;
        }
        transpositions += len - 1;
    }
    Some(if transpositions % 2 == 0 { tag } else { tag.inverted() })
}
