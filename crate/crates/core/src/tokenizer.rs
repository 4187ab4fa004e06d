//! Character-level SMILES tokenization into fixed-capacity id sequences with
//! segment ids and attention masks.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const SEP_ID: u32 = 3;
pub const MASK_ID: u32 = 4;

/// Number of reserved special tokens at the front of every vocabulary.
pub const NUM_SPECIAL: usize = 5;

pub const DEFAULT_CAPACITY: usize = 128;

const DEFAULT_CONTENT: [&str; 37] = [
    "C", "c", "N", "n", "O", "o", "S", "s", "P", "p", "F", "Cl", "Br", "I", "B", "H", "(", ")", "[", "]", "=",
    "#", "/", "\\", "@", "@@", "+", "-", ".", "%", "1", "2", "3", "4", "5", "6", "7",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TokenizeError {
    #[error("sequence needs {needed} positions but capacity is {capacity}")]
    Overflow { needed: usize, capacity: usize },
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
}

/// Ordered token list; ids are positions. The five specials come first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    /// Longest token length in bytes, bounds the greedy match window.
    max_len: usize,
}

impl Vocabulary {
    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocabulary, TokenizeError> {
        let specials = [PAD, UNK, CLS, SEP, MASK];
        if tokens.len() < NUM_SPECIAL || tokens[..NUM_SPECIAL].iter().zip(specials).any(|(t, s)| t != s) {
            return Err(TokenizeError::InvalidVocabulary(
                "the first five tokens must be [PAD] [UNK] [CLS] [SEP] [MASK]".into(),
            ));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(TokenizeError::InvalidVocabulary("empty token".into()));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(TokenizeError::InvalidVocabulary(format!("duplicate token {t:?}")));
            }
        }
        let max_len = tokens[NUM_SPECIAL..].iter().map(|t| t.len()).max().unwrap_or(1);
        Ok(Vocabulary { tokens, index, max_len })
    }

    /// The default 42-entry SMILES vocabulary.
    pub fn smiles_default() -> Vocabulary {
        let tokens = [PAD, UNK, CLS, SEP, MASK]
            .iter()
            .chain(DEFAULT_CONTENT.iter())
            .map(|s| s.to_string())
            .collect();
        Vocabulary::from_tokens(tokens).expect("default vocabulary is valid")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> &str {
        self.tokens.get(id as usize).map(String::as_str).unwrap_or(UNK)
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < NUM_SPECIAL
    }

    /// Ids of the non-special tokens.
    pub fn content_ids(&self) -> std::ops::Range<u32> {
        NUM_SPECIAL as u32..self.tokens.len() as u32
    }

    /// Greedy longest match over content tokens; characters with no match
    /// become `[UNK]`.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut rest = text;
        'outer: while !rest.is_empty() {
            let max = self.max_len.min(rest.len());
            for len in (1..=max).rev() {
                if !rest.is_char_boundary(len) {
                    continue;
                }
                let cand = &rest[..len];
                if let Some(&id) = self.index.get(cand) {
                    if !Vocabulary::is_special(id) {
                        out.push(cand.to_string());
                        rest = &rest[len..];
                        continue 'outer;
                    }
                }
            }
            let ch = rest.chars().next().expect("non-empty");
            out.push(UNK.to_string());
            rest = &rest[ch.len_utf8()..];
        }
        out
    }

    pub fn tokenize_ids(&self, text: &str) -> Vec<u32> {
        self.tokenize(text).iter().map(|t| self.id(t)).collect()
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = TokenizeError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::smiles_default()
    }
}

/// Concatenates token strings back into SMILES text.
pub fn detokenize(tokens: &[String]) -> String {
    tokens.concat()
}

/// Encoded model input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub segment_ids: Vec<u8>,
    pub attention_mask: Vec<u8>,
    /// Number of used (non-PAD) positions.
    pub length: usize,
}

impl TokenSequence {
    pub fn capacity(&self) -> usize {
        self.ids.len()
    }

    /// The used prefix only, with capacity equal to its length.
    pub fn trimmed(&self) -> TokenSequence {
        TokenSequence {
            ids: self.ids[..self.length].to_vec(),
            segment_ids: self.segment_ids[..self.length].to_vec(),
            attention_mask: self.attention_mask[..self.length].to_vec(),
            length: self.length,
        }
    }

    /// Pads out to `capacity` (no-op if already that large).
    pub fn padded(&self, capacity: usize) -> TokenSequence {
        let mut s = self.clone();
        if capacity > s.ids.len() {
            s.ids.resize(capacity, PAD_ID);
            s.segment_ids.resize(capacity, 0);
            s.attention_mask.resize(capacity, 0);
        }
        s
    }

    fn build(segments: &[&[u32]], capacity: usize) -> TokenSequence {
        let mut ids = vec![CLS_ID];
        let mut segment_ids = vec![0u8];
        for (s, toks) in segments.iter().enumerate() {
            ids.extend_from_slice(toks);
            ids.push(SEP_ID);
            segment_ids.extend(std::iter::repeat(s as u8).take(toks.len() + 1));
        }
        let length = ids.len();
        let mut attention_mask = vec![1u8; length];
        ids.resize(capacity, PAD_ID);
        segment_ids.resize(capacity, 0);
        attention_mask.resize(capacity, 0);
        TokenSequence {
            ids,
            segment_ids,
            attention_mask,
            length,
        }
    }
}

/// Vocabulary plus fixed sequence capacity.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    pub vocab: Vocabulary,
    pub capacity: usize,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Tokenizer {
            vocab: Vocabulary::smiles_default(),
            capacity: DEFAULT_CAPACITY,
        }
    }
}

impl Tokenizer {
    pub fn new(vocab: Vocabulary, capacity: usize) -> Tokenizer {
        Tokenizer { vocab, capacity }
    }

    /// `[CLS] tokens [SEP]` then padding.
    pub fn encode_single(&self, text: &str) -> Result<TokenSequence, TokenizeError> {
        let toks = self.vocab.tokenize_ids(text);
        let needed = toks.len() + 2;
        if needed > self.capacity {
            return Err(TokenizeError::Overflow {
                needed,
                capacity: self.capacity,
            });
        }
        Ok(TokenSequence::build(&[&toks], self.capacity))
    }

    /// `[CLS] tokens [SEP]` with no padding and no capacity limit, for
    /// inference on inputs longer than the training window.
    pub fn encode_single_unbounded(&self, text: &str) -> TokenSequence {
        let toks = self.vocab.tokenize_ids(text);
        TokenSequence::build(&[&toks], toks.len() + 2)
    }

    /// Like [`encode_single`](Self::encode_single) but drops trailing tokens
    /// instead of failing.
    pub fn encode_single_truncated(&self, text: &str) -> TokenSequence {
        let mut toks = self.vocab.tokenize_ids(text);
        toks.truncate(self.capacity.saturating_sub(2));
        TokenSequence::build(&[&toks], self.capacity)
    }

    /// `[CLS] a [SEP] b [SEP]`; segment 0 through the first `[SEP]`, 1 after.
    pub fn encode_pair(&self, a: &str, b: &str) -> Result<TokenSequence, TokenizeError> {
        let ta = self.vocab.tokenize_ids(a);
        let tb = self.vocab.tokenize_ids(b);
        let needed = ta.len() + tb.len() + 3;
        if needed > self.capacity {
            return Err(TokenizeError::Overflow {
                needed,
                capacity: self.capacity,
            });
        }
        Ok(TokenSequence::build(&[&ta, &tb], self.capacity))
    }

    /// Pair encoding that trims segment b first, then a, to fit.
    pub fn encode_pair_truncated(&self, a: &str, b: &str) -> TokenSequence {
        let mut ta = self.vocab.tokenize_ids(a);
        let mut tb = self.vocab.tokenize_ids(b);
        let budget = self.capacity.saturating_sub(3);
        let excess = (ta.len() + tb.len()).saturating_sub(budget);
        let from_b = excess.min(tb.len());
        tb.truncate(tb.len() - from_b);
        ta.truncate(ta.len() - (excess - from_b).min(ta.len()));
        TokenSequence::build(&[&ta, &tb], self.capacity)
    }

    /// Recovers the segment texts. `[UNK]` positions decode to the literal
    /// `[UNK]` marker.
    pub fn decode(&self, seq: &TokenSequence) -> (String, Option<String>) {
        let mut segments: Vec<String> = Vec::new();
        let mut cur = String::new();
        for &id in &seq.ids[..seq.length] {
            match id {
                CLS_ID => {}
                SEP_ID => segments.push(std::mem::take(&mut cur)),
                PAD_ID => break,
                _ => cur.push_str(self.vocab.token(id)),
            }
        }
        let mut it = segments.into_iter();
        let a = it.next().unwrap_or_default();
        (a, it.next())
    }
}
