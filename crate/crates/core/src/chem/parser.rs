//! Recursive-descent-free SMILES reader. Covers the organic subset, bracket
//! atoms (isotope, chirality, H count, charge, atom class), the bond symbols
//! `- = # : / \`, branches, ring closures (single digit and `%nn`) and
//! dot-separated fragments.

use std::collections::HashMap;

use super::element::Element;
use super::molecule::{Atom, Bond, BondOrder, BondStereo, Chirality, Molecule, StereoNeighbor};
use super::SmilesError;

/// Longest accepted input, in characters.
pub const DEFAULT_MAX_SMILES_LEN: usize = 500;

pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    parse_smiles_with_limit(text, DEFAULT_MAX_SMILES_LEN)
}

pub fn parse_smiles_with_limit(text: &str, max_len: usize) -> Result<Molecule, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::Empty);
    }
    let len = text.chars().count();
    if len > max_len {
        return Err(SmilesError::TooLong { len, max: max_len });
    }
    Parser::new(text).run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSymbol {
    Single,
    Double,
    Triple,
    Aromatic,
    Up,
    Down,
}

impl BondSymbol {
    fn from_byte(c: u8) -> Option<BondSymbol> {
        Some(match c {
            b'-' => BondSymbol::Single,
            b'=' => BondSymbol::Double,
            b'#' => BondSymbol::Triple,
            b':' => BondSymbol::Aromatic,
            b'/' => BondSymbol::Up,
            b'\\' => BondSymbol::Down,
            _ => return None,
        })
    }

    fn reversed(self) -> BondSymbol {
        match self {
            BondSymbol::Up => BondSymbol::Down,
            BondSymbol::Down => BondSymbol::Up,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Atom(usize),
    H,
    Ring(u16),
}

struct OpenRing {
    atom: usize,
    bond: Option<BondSymbol>,
    pos: usize,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    slots: Vec<Vec<Slot>>,
    prev: Option<usize>,
    pending: Option<(BondSymbol, usize)>,
    branches: Vec<(usize, usize)>,
    rings: HashMap<u16, OpenRing>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            src: text.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            slots: Vec::new(),
            prev: None,
            pending: None,
            branches: Vec::new(),
            rings: HashMap::new(),
        }
    }

    fn syntax<T>(&self, pos: usize, message: impl Into<String>) -> Result<T, SmilesError> {
        Err(SmilesError::Syntax {
            pos,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn run(mut self) -> Result<Molecule, SmilesError> {
        while let Some(c) = self.peek() {
            let start = self.pos;
            match c {
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.push_atom(atom, start)?;
                }
                b'(' => {
                    let Some(prev) = self.prev else {
                        return self.syntax(start, "branch opened before any atom");
                    };
                    if self.pending.is_some() {
                        return self.syntax(start, "bond symbol before '('");
                    }
                    self.branches.push((prev, start));
                    self.pos += 1;
                }
                b')' => {
                    let Some((atom, _)) = self.branches.pop() else {
                        return Err(SmilesError::UnmatchedParenthesis { pos: start });
                    };
                    if self.pending.is_some() {
                        return self.syntax(start, "dangling bond symbol before ')'");
                    }
                    self.prev = Some(atom);
                    self.pos += 1;
                }
                b'.' => {
                    if self.pending.is_some() {
                        return self.syntax(start, "bond symbol before '.'");
                    }
                    if self.prev.is_none() {
                        return self.syntax(start, "empty fragment");
                    }
                    if !self.branches.is_empty() {
                        return self.syntax(start, "'.' inside a branch");
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    self.pos += 1;
                    self.ring_bond((c - b'0') as u16, start)?;
                }
                b'%' => {
                    let d = self.src.get(self.pos + 1..self.pos + 3);
                    match d {
                        Some([a, b]) if a.is_ascii_digit() && b.is_ascii_digit() => {
                            self.pos += 3;
                            self.ring_bond(((a - b'0') * 10 + (b - b'0')) as u16, start)?;
                        }
                        _ => return self.syntax(start, "'%' must be followed by two digits"),
                    }
                }
                _ => {
                    if let Some(sym) = BondSymbol::from_byte(c) {
                        if self.prev.is_none() {
                            return self.syntax(start, "bond symbol without a preceding atom");
                        }
                        if self.pending.is_some() {
                            return self.syntax(start, "two consecutive bond symbols");
                        }
                        self.pending = Some((sym, start));
                        self.pos += 1;
                    } else {
                        let atom = self.organic_atom()?;
                        self.push_atom(atom, start)?;
                    }
                }
            }
        }
        if let Some((_, pos)) = self.pending {
            return self.syntax(pos, "dangling bond symbol at end of input");
        }
        if let Some(&(_, pos)) = self.branches.last() {
            return Err(SmilesError::UnmatchedParenthesis { pos });
        }
        if let Some((&ring, open)) = self.rings.iter().min_by_key(|(_, o)| o.pos) {
            return Err(SmilesError::UnmatchedRingClosure { ring, pos: open.pos });
        }
        if self.atoms.is_empty() {
            return Err(SmilesError::Empty);
        }
        if self.prev.is_none() {
            return self.syntax(self.src.len(), "trailing '.'");
        }
        let stereo_order = self
            .slots
            .into_iter()
            .map(|slots| {
                slots
                    .into_iter()
                    .map(|s| match s {
                        Slot::Atom(a) => StereoNeighbor::Atom(a),
                        Slot::H => StereoNeighbor::ImplicitH,
                        Slot::Ring(_) => unreachable!("all rings closed"),
                    })
                    .collect()
            })
            .collect();
        Molecule::with_stereo_order(self.atoms, self.bonds, Some(stereo_order))
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let start = self.pos;
        let c = self.src[start];
        let two = self.src.get(start..start + 2);
        let (symbol, aromatic, width) = match (c, two) {
            (b'C', Some(b"Cl")) => ("Cl", false, 2),
            (b'B', Some(b"Br")) => ("Br", false, 2),
            (b'B' | b'C' | b'N' | b'O' | b'P' | b'S' | b'F' | b'I', _) => {
                (std::str::from_utf8(&self.src[start..start + 1]).unwrap(), false, 1)
            }
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            (c, _) if c.is_ascii_uppercase() => {
                let end = if self.src.get(start + 1).is_some_and(|n| n.is_ascii_lowercase()) {
                    start + 2
                } else {
                    start + 1
                };
                let sym = String::from_utf8_lossy(&self.src[start..end]).into_owned();
                return Err(SmilesError::UnsupportedElement { symbol: sym, pos: start });
            }
            _ => {
                let ch = String::from_utf8_lossy(&self.src[start..]).chars().next().unwrap_or('?');
                return self.syntax(start, format!("unexpected character '{ch}'"));
            }
        };
        self.pos += width;
        let element = Element::from_symbol(symbol).expect("organic subset is in the table");
        Ok(Atom::organic(element, aromatic))
    }

    fn read_number(&mut self) -> Option<u32> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            std::str::from_utf8(&self.src[start..self.pos]).ok()?.parse().ok()
        }
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        let isotope = match self.read_number() {
            Some(0) => return self.syntax(open + 1, "isotope must be positive"),
            Some(n) if n > u16::MAX as u32 => return self.syntax(open + 1, "isotope out of range"),
            Some(n) => Some(n as u16),
            None => None,
        };

        let sym_pos = self.pos;
        let Some(c) = self.peek() else {
            return self.syntax(sym_pos, "unterminated bracket atom");
        };
        let (element, aromatic) = if c.is_ascii_uppercase() {
            let two = self
                .src
                .get(sym_pos..sym_pos + 2)
                .filter(|s| s[1].is_ascii_lowercase())
                .and_then(|s| std::str::from_utf8(s).ok())
                .and_then(Element::from_symbol);
            match two {
                Some(e) => {
                    self.pos += 2;
                    (e, false)
                }
                None => {
                    let one = std::str::from_utf8(&self.src[sym_pos..sym_pos + 1]).unwrap();
                    match Element::from_symbol(one) {
                        Some(e) => {
                            self.pos += 1;
                            (e, false)
                        }
                        None => {
                            let end = if self.src.get(sym_pos + 1).is_some_and(|n| n.is_ascii_lowercase()) {
                                sym_pos + 2
                            } else {
                                sym_pos + 1
                            };
                            return Err(SmilesError::UnsupportedElement {
                                symbol: String::from_utf8_lossy(&self.src[sym_pos..end]).into_owned(),
                                pos: sym_pos,
                            });
                        }
                    }
                }
            }
        } else if c.is_ascii_lowercase() {
            let two = self.src.get(sym_pos..sym_pos + 2);
            let (sym, width) = match two {
                Some(b"se") => ("Se", 2),
                Some(b"as") => ("As", 2),
                Some(b"te") => ("Te", 2),
                _ => match c {
                    b'b' => ("B", 1),
                    b'c' => ("C", 1),
                    b'n' => ("N", 1),
                    b'o' => ("O", 1),
                    b'p' => ("P", 1),
                    b's' => ("S", 1),
                    _ => {
                        return Err(SmilesError::UnsupportedElement {
                            symbol: (c as char).to_string(),
                            pos: sym_pos,
                        })
                    }
                },
            };
            self.pos += width;
            let e = Element::from_symbol(sym).expect("aromatic symbols are in the table");
            (e, true)
        } else {
            return self.syntax(sym_pos, "expected element symbol in bracket atom");
        };
        if aromatic && !element.aromatic_allowed() {
            return Err(SmilesError::UnsupportedElement {
                symbol: element.symbol().to_lowercase(),
                pos: sym_pos,
            });
        }

        let mut chirality = None;
        if self.peek() == Some(b'@') {
            self.pos += 1;
            if self.peek() == Some(b'@') {
                self.pos += 1;
                chirality = Some(Chirality::Clockwise);
            } else {
                chirality = Some(Chirality::Anticlockwise);
            }
            if self.peek().is_some_and(|c| c.is_ascii_uppercase() && c != b'H') {
                return self.syntax(self.pos, "extended chirality classes are not supported");
            }
        }

        let mut h = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            h = match self.peek() {
                Some(d) if d.is_ascii_digit() => {
                    self.pos += 1;
                    d - b'0'
                }
                _ => 1,
            };
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.read_number() {
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    self.pos += 1;
                    charge += unit;
                }
            }
            if !(-15..=15).contains(&charge) {
                return self.syntax(self.pos, "charge out of range");
            }
        }

        if self.peek() == Some(b':') {
            self.pos += 1;
            if self.read_number().is_none() {
                return self.syntax(self.pos, "atom class must be a number");
            }
        }

        if self.peek() != Some(b']') {
            return self.syntax(self.pos, "expected ']'");
        }
        self.pos += 1;

        Ok(Atom {
            element,
            aromatic,
            formal_charge: charge as i8,
            isotope,
            explicit_h: Some(h),
            chirality,
        })
    }

    fn push_atom(&mut self, atom: Atom, pos: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        let has_h = atom.explicit_h.unwrap_or(0) > 0;
        self.atoms.push(atom);
        self.slots.push(Vec::new());
        if let Some(prev) = self.prev {
            let sym = self.pending.take().map(|(s, _)| s);
            self.add_bond(prev, idx, sym, pos)?;
            self.slots[prev].push(Slot::Atom(idx));
            self.slots[idx].push(Slot::Atom(prev));
        }
        if has_h {
            self.slots[idx].push(Slot::H);
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn add_bond(&mut self, a: usize, b: usize, sym: Option<BondSymbol>, pos: usize) -> Result<(), SmilesError> {
        if a == b {
            return self.syntax(pos, "ring closure on a single atom");
        }
        if self.bonds.iter().any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a)) {
            return self.syntax(pos, format!("duplicate bond between atoms {a} and {b}"));
        }
        let both_aromatic = self.atoms[a].aromatic && self.atoms[b].aromatic;
        let (order, stereo) = match sym {
            None => (
                if both_aromatic {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                },
                None,
            ),
            Some(BondSymbol::Single) => (BondOrder::Single, None),
            Some(BondSymbol::Double) => (BondOrder::Double, None),
            Some(BondSymbol::Triple) => (BondOrder::Triple, None),
            Some(BondSymbol::Aromatic) => {
                if !both_aromatic {
                    return self.syntax(pos, "aromatic bond between non-aromatic atoms");
                }
                (BondOrder::Aromatic, None)
            }
            Some(BondSymbol::Up) => (BondOrder::Single, Some(BondStereo::Up)),
            Some(BondSymbol::Down) => (BondOrder::Single, Some(BondStereo::Down)),
        };
        self.bonds.push(Bond { a, b, order, stereo });
        Ok(())
    }

    fn ring_bond(&mut self, ring: u16, pos: usize) -> Result<(), SmilesError> {
        let Some(cur) = self.prev else {
            return self.syntax(pos, "ring-closure digit before any atom");
        };
        let sym = self.pending.take().map(|(s, _)| s);
        if let Some(open) = self.rings.remove(&ring) {
            // A symbol written at the opening atom reads opening -> closing;
            // one written at the closing atom reads closing -> opening.
            let resolved = match (open.bond, sym) {
                (Some(x), Some(y)) if x != y.reversed() && x != y => {
                    return self.syntax(pos, format!("conflicting bond symbols on ring closure {ring}"));
                }
                (Some(x), _) => Some(x),
                (None, Some(y)) => Some(y.reversed()),
                (None, None) => None,
            };
            self.add_bond(open.atom, cur, resolved, pos)?;
            let slot = self.slots[open.atom]
                .iter_mut()
                .find(|s| matches!(s, Slot::Ring(r) if *r == ring))
                .expect("ring placeholder recorded at opening");
            *slot = Slot::Atom(cur);
            self.slots[cur].push(Slot::Atom(open.atom));
        } else {
            self.rings.insert(ring, OpenRing { atom: cur, bond: sym, pos });
            self.slots[cur].push(Slot::Ring(ring));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bond_tuples(m: &Molecule) -> Vec<(usize, usize, BondOrder)> {
        m.bonds().iter().map(|b| (b.a, b.b, b.order)).collect()
    }

    #[test]
    fn ethanol_chain() {
        let m = parse_smiles("CCO").unwrap();
        assert_eq!(m.atom_count(), 3);
        assert_eq!(
            bond_tuples(&m),
            vec![(0, 1, BondOrder::Single), (1, 2, BondOrder::Single)]
        );
    }

    #[test]
    fn cyclopropane_ring_closure() {
        let m = parse_smiles("C1CC1").unwrap();
        assert_eq!(m.atom_count(), 3);
        assert_eq!(m.bonds().len(), 3);
        assert!((0..3).all(|i| m.degree(i) == 2));
    }

    #[test]
    fn seliciclib_heavy_atoms() {
        let m = parse_smiles("CC[C@H](CO)NC1=NC(NCC2=CC=CC=C2)=C2C(=N1)N(C(C)C)C=N2").unwrap();
        // C19 N6 O1
        assert_eq!(m.heavy_atom_count(), 26);
    }

    #[test]
    fn bracket_atom_fields() {
        let m = parse_smiles("[13CH3][N+](C)(C)C.[O-]").unwrap();
        let c = m.atom(0);
        assert_eq!(c.isotope, Some(13));
        assert_eq!(c.explicit_h, Some(3));
        assert_eq!(m.atom(1).formal_charge, 1);
        assert_eq!(m.atom(5).formal_charge, -1);
        assert_eq!(m.components().len(), 2);
        let m = parse_smiles("[Fe+++]").unwrap();
        assert_eq!(m.atom(0).formal_charge, 3);
        let m = parse_smiles("[Cu-2]").unwrap();
        assert_eq!(m.atom(0).formal_charge, -2);
    }

    #[test]
    fn chirality_tags() {
        let m = parse_smiles("N[C@@H](C)C(=O)O").unwrap();
        assert_eq!(m.atom(1).chirality, Some(Chirality::Clockwise));
        let m = parse_smiles("N[C@H](C)C(=O)O").unwrap();
        assert_eq!(m.atom(1).chirality, Some(Chirality::Anticlockwise));
    }

    #[test]
    fn bond_symbols() {
        let m = parse_smiles("C=CC#N").unwrap();
        let orders: Vec<_> = m.bonds().iter().map(|b| b.order).collect();
        assert_eq!(orders, [BondOrder::Double, BondOrder::Single, BondOrder::Triple]);
        let m = parse_smiles("F/C=C\\F").unwrap();
        assert_eq!(m.bonds()[0].stereo, Some(BondStereo::Up));
        assert_eq!(m.bonds()[2].stereo, Some(BondStereo::Down));
        let m = parse_smiles("c1ccccc1-c1ccccc1").unwrap();
        assert_eq!(m.bonds()[6].order, BondOrder::Single);
        assert_eq!(m.bonds()[0].order, BondOrder::Aromatic);
    }

    #[test]
    fn percent_ring_labels() {
        let a = parse_smiles("C%10CCCCC%10").unwrap();
        assert_eq!(a.bonds().len(), 6);
        let b = parse_smiles("C%10CC%11CC%10CC%11").unwrap();
        assert_eq!(b.bonds().len(), 8);
    }

    #[test]
    fn ring_bond_symbol_on_either_side() {
        let a = parse_smiles("C=1CCCCC1").unwrap();
        let b = parse_smiles("C1CCCCC=1").unwrap();
        assert!(a.bonds().iter().any(|x| x.order == BondOrder::Double));
        assert!(b.bonds().iter().any(|x| x.order == BondOrder::Double));
        assert!(parse_smiles("C=1CCCCC#1").is_err());
    }

    #[test]
    fn error_cases() {
        assert!(matches!(parse_smiles(""), Err(SmilesError::Empty)));
        assert!(matches!(
            parse_smiles("C1CC"),
            Err(SmilesError::UnmatchedRingClosure { ring: 1, pos: 1 })
        ));
        assert!(matches!(parse_smiles("CC(C"), Err(SmilesError::UnmatchedParenthesis { pos: 2 })));
        assert!(matches!(parse_smiles("CC)C"), Err(SmilesError::UnmatchedParenthesis { pos: 2 })));
        assert!(matches!(
            parse_smiles("[Xx]"),
            Err(SmilesError::UnsupportedElement { pos: 1, .. })
        ));
        assert!(matches!(parse_smiles("CZ"), Err(SmilesError::UnsupportedElement { pos: 1, .. })));
        assert!(matches!(parse_smiles("C(=C)(C)(C)C"), Err(SmilesError::Valence { atom: 0, .. })));
        assert!(matches!(parse_smiles("O=O=O"), Err(SmilesError::Valence { .. })));
        assert!(matches!(parse_smiles("C==C"), Err(SmilesError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_smiles("C?"), Err(SmilesError::Syntax { pos: 1, .. })));
        assert!(matches!(parse_smiles("C11"), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("C1C1"), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("C:C"), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("CC."), Err(SmilesError::Syntax { .. })));
        assert!(matches!(parse_smiles("[C"), Err(SmilesError::Syntax { .. })));
        let long = "C".repeat(501);
        assert!(matches!(parse_smiles(&long), Err(SmilesError::TooLong { len: 501, max: 500 })));
        assert!(parse_smiles(&long[..500]).is_ok());
    }

    #[test]
    fn multi_valence_elements() {
        let m = parse_smiles("CS(=O)(=O)C").unwrap();
        assert_eq!(m.implicit_hydrogens(1), 0);
        let m = parse_smiles("OP(=O)(O)O").unwrap();
        assert_eq!(m.implicit_hydrogens(1), 0);
        let m = parse_smiles("CS(=O)C").unwrap();
        assert_eq!(m.implicit_hydrogens(1), 0);
        let m = parse_smiles("CSC").unwrap();
        assert_eq!(m.implicit_hydrogens(1), 0);
        let m = parse_smiles("S").unwrap();
        assert_eq!(m.implicit_hydrogens(0), 2);
    }
}
