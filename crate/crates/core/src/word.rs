//! Alphabet symbols and words over them.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Maximum number of atomic propositions a symbol can carry.
pub const MAX_AP: usize = 8;

/// Set of atomic propositions that hold on one transition, as a bitmask.
///
/// Bit `i` set means proposition `p_{i+1}` is true. The empty set is a valid
/// symbol.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(u8);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SymbolError {
    #[error("symbol bitmask {bits} does not fit {ap_count} atomic propositions")]
    OutOfRange { bits: u32, ap_count: usize },
    #[error("invalid symbol token {0:?}")]
    Parse(String),
}

impl Symbol {
    pub const EMPTY: Symbol = Symbol(0);

    pub fn new(bits: u32, ap_count: usize) -> Result<Self, SymbolError> {
        if ap_count > MAX_AP || bits >= (1u32 << ap_count) {
            return Err(SymbolError::OutOfRange { bits, ap_count });
        }
        Ok(Symbol(bits as u8))
    }

    pub const fn from_bits(bits: u8) -> Self {
        Symbol(bits)
    }

    pub const fn bits(self) -> u8 {
        self.0
    }

    /// Whether proposition `p_{index+1}` holds.
    pub fn has(self, index: usize) -> bool {
        self.0 & (1 << index) != 0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Finite symbol sequence; the empty word is `λ`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<Symbol>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(symbols: Vec<Symbol>) -> Self {
        Word(symbols)
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        Word(bits.iter().map(|&b| Symbol(b)).collect())
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, s: Symbol) {
        self.0.push(s);
    }

    pub fn last(&self) -> Option<Symbol> {
        self.0.last().copied()
    }

    /// Collapse every run of equal adjacent symbols to a single occurrence.
    pub fn compress(&self) -> Word {
        let mut out = self.0.clone();
        out.dedup();
        Word(out)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut out = Vec::with_capacity(self.len() + other.len());
        out.extend_from_slice(&self.0);
        out.extend_from_slice(&other.0);
        Word(out)
    }

    pub fn prefix(&self, len: usize) -> Word {
        Word(self.0[..len].to_vec())
    }

    pub fn suffix_from(&self, start: usize) -> Word {
        Word(self.0[start..].to_vec())
    }

    /// Parse `"b0,b1,..."` (decimal bitmasks). The empty string is `λ`.
    pub fn parse(text: &str, ap_count: usize) -> Result<Word, SymbolError> {
        let text = text.trim();
        if text.is_empty() {
            return Ok(Word::empty());
        }
        text.split(',')
            .map(|tok| {
                let bits: u32 =
                    tok.trim().parse().map_err(|_| SymbolError::Parse(tok.to_string()))?;
                Symbol::new(bits, ap_count)
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Word)
    }
}

impl FromIterator<Symbol> for Word {
    fn from_iter<I: IntoIterator<Item = Symbol>>(iter: I) -> Self {
        Word(iter.into_iter().collect())
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "λ");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}
