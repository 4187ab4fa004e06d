//! SMILES parsing, writing, canonicalization and enumeration.

mod aromaticity;
mod canon;
mod element;
mod isomorphism;
mod molecule;
mod parser;
mod rings;
mod writer;

use thiserror::Error;

pub use aromaticity::perceive_aromaticity;
pub use canon::{
    canonical_ranks, canonical_smiles, canonicalize, enumerate_smiles, enumerate_with_rng,
    same_molecule,
};
pub use element::Element;
pub use isomorphism::{find_isomorphism, is_isomorphic};
pub use molecule::{
    implicit_hydrogens, organic_hydrogens, Atom, Bond, BondOrder, BondStereo, Chirality, Molecule,
};
pub use parser::{parse_smiles, parse_smiles_with_limit, DEFAULT_MAX_SMILES_LEN};
pub use rings::{cyclomatic_number, find_rings, ring_bonds, Ring};
pub use writer::write_smiles;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES")]
    Empty,
    #[error("SMILES has {len} characters, limit is {max}")]
    TooLong { len: usize, max: usize },
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("ring closure {ring} opened at position {pos} is never closed")]
    UnmatchedRingClosure { ring: u16, pos: usize },
    #[error("unmatched parenthesis at position {pos}")]
    UnmatchedParenthesis { pos: usize },
    #[error("unsupported element '{symbol}' at position {pos}")]
    UnsupportedElement { symbol: String, pos: usize },
    #[error("valence violation on atom {atom} ({element}): bond order sum {bond_order_sum}")]
    Valence {
        atom: usize,
        element: String,
        bond_order_sum: u32,
    },
    #[error("invalid molecular graph: {0}")]
    InvalidGraph(String),
}

/// One non-comment line of a SMILES file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmilesRecord {
    /// 1-based line number in the source.
    pub line: usize,
    pub smiles: String,
}

/// Reads SMILES text: one molecule per line, blank lines and lines starting
/// with `#` skipped. Anything after the first whitespace is treated as a name
/// and dropped.
pub fn read_smiles_lines(text: &str) -> Vec<SmilesRecord> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                return None;
            }
            let smiles = line.split_whitespace().next()?.to_string();
            Some(SmilesRecord { line: i + 1, smiles })
        })
        .collect()
}
