//! Regex fragment: parsing, Thompson NFAs, complete DFAs and their complements.
//!
//! Matching is always whole-string. Every byte set is relative to a contiguous
//! [`Alphabet`]; bytes outside it are never accepted.

mod ast;
mod dfa;
mod enumerate;
mod nfa;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ast::Ast;
pub use dfa::{determinize, minimize, complement, Dfa, DEFAULT_STATE_CAP};
pub use enumerate::{enumerate_accepting_strings, enumerate_nfa_paths, Enumeration};
pub use nfa::{build_nfa, nfa_match, Nfa};
pub use parse::parse_regex;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegexError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unsupported feature at offset {offset}: {construct}")]
    Unsupported { offset: usize, construct: &'static str },
    #[error("byte 0x{byte:02x} at offset {offset} is outside the alphabet {alphabet}")]
    OutsideAlphabet { offset: usize, byte: u8, alphabet: Alphabet },
    #[error("determinization exceeded the cap of {cap} states")]
    TooManyStates { cap: usize },
}

/// Contiguous byte range `lo..=hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alphabet {
    pub lo: u8,
    pub hi: u8,
}

impl Default for Alphabet {
    fn default() -> Self {
        Alphabet::PRINTABLE
    }
}

impl Alphabet {
    pub const PRINTABLE: Alphabet = Alphabet { lo: 0x20, hi: 0x7e };

    pub fn new(lo: u8, hi: u8) -> Option<Self> {
        (lo <= hi).then_some(Alphabet { lo, hi })
    }

    pub fn size(&self) -> usize {
        (self.hi - self.lo) as usize + 1
    }

    pub fn contains(&self, b: u8) -> bool {
        (self.lo..=self.hi).contains(&b)
    }

    pub fn bytes(&self) -> impl DoubleEndedIterator<Item = u8> + Clone {
        self.lo..=self.hi
    }

    pub fn index(&self, b: u8) -> Option<usize> {
        self.contains(b).then(|| (b - self.lo) as usize)
    }

    pub fn byte(&self, index: usize) -> u8 {
        self.lo + index as u8
    }

    pub fn all(&self) -> ByteSet {
        ByteSet::range(self.lo, self.hi)
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{:02x}-0x{:02x}", self.lo, self.hi)
    }
}

/// 256-bit byte set.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct ByteSet([u64; 4]);

impl ByteSet {
    pub const EMPTY: ByteSet = ByteSet([0; 4]);

    pub fn single(b: u8) -> Self {
        let mut s = Self::EMPTY;
        s.insert(b);
        s
    }

    pub fn range(lo: u8, hi: u8) -> Self {
        let mut s = Self::EMPTY;
        for b in lo..=hi {
            s.insert(b);
        }
        s
    }

    pub fn insert(&mut self, b: u8) {
        self.0[(b >> 6) as usize] |= 1 << (b & 63);
    }

    pub fn remove(&mut self, b: u8) {
        self.0[(b >> 6) as usize] &= !(1 << (b & 63));
    }

    pub fn contains(&self, b: u8) -> bool {
        self.0[(b >> 6) as usize] >> (b & 63) & 1 == 1
    }

    pub fn union(&self, o: &Self) -> Self {
        ByteSet(std::array::from_fn(|i| self.0[i] | o.0[i]))
    }

    pub fn intersect(&self, o: &Self) -> Self {
        ByteSet(std::array::from_fn(|i| self.0[i] & o.0[i]))
    }

    pub fn minus(&self, o: &Self) -> Self {
        ByteSet(std::array::from_fn(|i| self.0[i] & !o.0[i]))
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        (0u16..256).map(|b| b as u8).filter(move |b| self.contains(*b))
    }

    pub fn first(&self) -> Option<u8> {
        self.iter().next()
    }

    pub fn last(&self) -> Option<u8> {
        (0u16..256).rev().map(|b| b as u8).find(|b| self.contains(*b))
    }

    /// Maximal runs of consecutive members as inclusive ranges.
    pub fn ranges(&self) -> Vec<(u8, u8)> {
        let mut out: Vec<(u8, u8)> = Vec::new();
        for b in self.iter() {
            match out.last_mut() {
                Some((_, hi)) if *hi as u16 + 1 == b as u16 => *hi = b,
                _ => out.push((b, b)),
            }
        }
        out
    }
}

impl fmt::Debug for ByteSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", describe_bytes(self))
    }
}

fn show_byte(b: u8) -> String {
    if b.is_ascii_graphic() {
        (b as char).to_string()
    } else {
        format!("\\x{b:02x}")
    }
}

/// Compact class notation, e.g. `[a-f0]`; single bytes print bare.
pub fn describe_bytes(set: &ByteSet) -> String {
    let ranges = set.ranges();
    if let [(lo, hi)] = ranges.as_slice() {
        if lo == hi {
            return show_byte(*lo);
        }
    }
    let mut s = String::from("[");
    for (lo, hi) in ranges {
        s.push_str(&show_byte(lo));
        if hi > lo {
            s.push('-');
            s.push_str(&show_byte(hi));
        }
    }
    s.push(']');
    s
}

/// A parsed pattern with its NFA and minimized complete DFA.
#[derive(Debug, Clone)]
pub struct CompiledRegex {
    pub pattern: String,
    pub ast: Ast,
    pub nfa: Nfa,
    pub dfa: Dfa,
}

impl CompiledRegex {
    pub fn compile(pattern: &str, alphabet: Alphabet, state_cap: usize) -> Result<Self, RegexError> {
        let ast = parse_regex(pattern, alphabet)?;
        let nfa = build_nfa(&ast, alphabet);
        let dfa = minimize(&determinize(&nfa, state_cap)?);
        Ok(CompiledRegex { pattern: pattern.to_string(), ast, nfa, dfa })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byteset_ranges_and_description() {
        let mut s = ByteSet::range(b'a', b'f');
        s.insert(b'0');
        assert_eq!(s.ranges(), vec![(b'0', b'0'), (b'a', b'f')]);
        assert_eq!(describe_bytes(&s), "[0a-f]");
        assert_eq!(describe_bytes(&ByteSet::single(b'x')), "x");
        assert_eq!(s.len(), 7);
        assert_eq!(s.first(), Some(b'0'));
        assert_eq!(s.last(), Some(b'f'));
        assert_eq!(ByteSet::range(0, 255).len(), 256);
    }
}
