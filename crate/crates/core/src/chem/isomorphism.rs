//! Backtracking graph isomorphism over atom attributes and bond orders.
//! Independent of canonical ranking, so it can check the canonicalizer.

use std::collections::VecDeque;

use super::molecule::Molecule;

type Label = (u8, bool, i8, u16, u8, usize);

fn label(mol: &Molecule, i: usize) -> Label {
    let a = mol.atom(i);
    (
        a.element.atomic_number(),
        a.aromatic,
        a.formal_charge,
        a.isotope.unwrap_or(0),
        mol.implicit_hydrogens(i),
        mol.degree(i),
    )
}

/// Returns `map` with `map[i]` the atom of `b` matched to atom `i` of `a`.
/// Stereo marks are ignored.
pub fn find_isomorphism(a: &Molecule, b: &Molecule) -> Option<Vec<usize>> {
    let n = a.atom_count();
    if n != b.atom_count() || a.bonds().len() != b.bonds().len() {
        return None;
    }
    let la: Vec<_> = (0..n).map(|i| label(a, i)).collect();
    let lb: Vec<_> = (0..n).map(|i| label(b, i)).collect();
    {
        let (mut sa, mut sb) = (la.clone(), lb.clone());
        sa.sort_unstable();
        sb.sort_unstable();
        if sa != sb {
            return None;
        }
    }
    // BFS order over `a` so each atom after the first of a component has a
    // mapped neighbor to constrain its candidates.
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut q = VecDeque::from([root]);
        while let Some(v) = q.pop_front() {
            order.push(v);
            for &(nb, _) in a.neighbors(v) {
                if !seen[nb] {
                    seen[nb] = true;
                    q.push_back(nb);
                }
            }
        }
    }
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let ok = extend(a, b, &order, 0, &mut map, &mut used, &la, &lb);
    ok.then_some(map)
}

#[allow(clippy::too_many_arguments)]
fn extend(
    a: &Molecule,
    b: &Molecule,
    order: &[usize],
    depth: usize,
    map: &mut [usize],
    used: &mut [bool],
    la: &[Label],
    lb: &[Label],
) -> bool {
    if depth == order.len() {
        return true;
    }
    let v = order[depth];
    let anchor = a.neighbors(v).iter().find(|&&(nb, _)| map[nb] != usize::MAX);
    let candidates: Vec<usize> = match anchor {
        Some(&(nb, _)) => b.neighbors(map[nb]).iter().map(|&(x, _)| x).collect(),
        None => (0..b.atom_count()).collect(),
    };
    for w in candidates {
        if used[w] || la[v] != lb[w] {
            continue;
        }
        let consistent = a.neighbors(v).iter().all(|&(nb, bi)| {
            let m = map[nb];
            m == usize::MAX
                || b
                    .bond_between(w, m)
                    .is_some_and(|bond| bond.order == a.bonds()[bi].order)
        });
        if !consistent {
            continue;
        }
        map[v] = w;
        used[w] = true;
        if extend(a, b, order, depth + 1, map, used, la, lb) {
            return true;
        }
        map[v] = usize::MAX;
        used[w] = false;
    }
    false
}

pub fn is_isomorphic(a: &Molecule, b: &Molecule) -> bool {
    find_isomorphism(a, b).is_some()
}
