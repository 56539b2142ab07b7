//! Finite binary strings with prefix operations.
//!
//! Bits are stored most-significant first inside 64-bit words, so prefix
//! comparisons reduce to masked word comparisons. Bits past `len` are always
//! zero, which keeps equality and hashing purely structural.

use std::cmp::min;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CoreError;

const WORD: usize = 64;

/// A finite binary string.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

#[inline]
fn high_mask(bits: usize) -> u64 {
    // Mask selecting the first `bits` (1..=64) positions of a word.
    if bits >= WORD {
        u64::MAX
    } else {
        !(u64::MAX >> bits)
    }
}

impl BitString {
    /// The empty string.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        BitString {
            words: Vec::with_capacity(bits.div_ceil(WORD)),
            len: 0,
        }
    }

    /// Builds a string from an iterator of bits.
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut s = BitString::new();
        for b in bits {
            s.push(b);
        }
        s
    }

    /// Parses a string of `'0'`/`'1'` characters.
    pub fn parse(text: &str) -> Result<Self, CoreError> {
        let mut s = BitString::with_capacity(text.len());
        for (i, c) in text.chars().enumerate() {
            match c {
                '0' => s.push(false),
                '1' => s.push(true),
                other => {
                    return Err(CoreError::BadBitString {
                        position: i,
                        found: other,
                    })
                }
            }
        }
        Ok(s)
    }

    /// The low `width` bits of `value`, most significant first.
    pub fn from_word(value: u64, width: u32) -> Self {
        let mut s = BitString::new();
        s.push_word(value, width);
        s
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Backing words, most significant bit first; unused tail bits are zero.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Bit at `index` (0-based).
    #[inline]
    pub fn get(&self, index: usize) -> Option<bool> {
        if index >= self.len {
            return None;
        }
        Some(self.bit(index))
    }

    #[inline]
    fn bit(&self, index: usize) -> bool {
        (self.words[index / WORD] >> (WORD - 1 - index % WORD)) & 1 == 1
    }

    #[inline]
    pub fn push(&mut self, bit: bool) {
        let offset = self.len % WORD;
        if offset == 0 {
            self.words.push(0);
        }
        if bit {
            let last = self.words.len() - 1;
            self.words[last] |= 1u64 << (WORD - 1 - offset);
        }
        self.len += 1;
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_word(&mut self, value: u64, width: u32) {
        let width = width as usize;
        assert!(width <= WORD, "push_word width {width} exceeds 64");
        if width == 0 {
            return;
        }
        let value = if width == WORD {
            value
        } else {
            value & ((1u64 << width) - 1)
        };
        // Left-align the chunk, then split it across at most two words.
        let aligned = value << (WORD - width);
        let offset = self.len % WORD;
        if offset == 0 {
            self.words.push(aligned);
        } else {
            let last = self.words.len() - 1;
            self.words[last] |= aligned >> offset;
            let room = WORD - offset;
            if width > room {
                self.words.push(aligned << room);
            }
        }
        self.len += width;
    }

    /// Appends another string.
    pub fn extend_from(&mut self, other: &BitString) {
        let full = other.len / WORD;
        for w in &other.words[..full] {
            self.push_word(*w, WORD as u32);
        }
        let rest = other.len % WORD;
        if rest > 0 {
            self.push_word(other.words[full] >> (WORD - rest), rest as u32);
        }
    }

    /// `self ∗ other`.
    pub fn concat(&self, other: &BitString) -> BitString {
        let mut s = self.clone();
        s.extend_from(other);
        s
    }

    /// `self ∗ bit`.
    pub fn with_bit(&self, bit: bool) -> BitString {
        let mut s = self.clone();
        s.push(bit);
        s
    }

    /// Shortens the string to `len` bits (no-op if already shorter).
    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        self.len = len;
        self.words.truncate(len.div_ceil(WORD));
        let rest = len % WORD;
        if rest > 0 {
            let last = self.words.len() - 1;
            self.words[last] &= high_mask(rest);
        }
    }

    /// The first `len` bits.
    pub fn prefix(&self, len: usize) -> BitString {
        let mut s = self.clone();
        s.truncate(len);
        s
    }

    /// Reads `width` bits starting at `start` as an unsigned integer.
    pub fn read_word(&self, start: usize, width: u32) -> Option<u64> {
        let width = width as usize;
        if width > WORD || start + width > self.len {
            return None;
        }
        if width == 0 {
            return Some(0);
        }
        let wi = start / WORD;
        let offset = start % WORD;
        let mut v = self.words[wi] << offset;
        if offset + width > WORD {
            v |= self.words[wi + 1] >> (WORD - offset);
        }
        Some(v >> (WORD - width))
    }

    /// Length of the longest common prefix.
    pub fn common_prefix_len(&self, other: &BitString) -> usize {
        let limit = min(self.len, other.len);
        for (i, (a, b)) in self.words.iter().zip(other.words.iter()).enumerate() {
            let diff = a ^ b;
            if diff != 0 {
                return min(limit, i * WORD + diff.leading_zeros() as usize);
            }
        }
        limit
    }

    /// `self ⊑ other`: self is an initial segment of other.
    #[inline]
    pub fn is_prefix_of(&self, other: &BitString) -> bool {
        if self.len > other.len {
            return false;
        }
        let full = self.len / WORD;
        if self.words[..full] != other.words[..full] {
            return false;
        }
        let rest = self.len % WORD;
        rest == 0 || (self.words[full] ^ other.words[full]) & high_mask(rest) == 0
    }

    /// `self ⊒ other`.
    #[inline]
    pub fn extends(&self, other: &BitString) -> bool {
        other.is_prefix_of(self)
    }

    /// Neither string extends the other.
    pub fn incomparable(&self, other: &BitString) -> bool {
        !self.is_prefix_of(other) && !other.is_prefix_of(self)
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.bit(i))
    }
}

impl Hash for BitString {
    fn hash<H: Hasher>(&self, state: &mut H) {
        // Strings compared in practice share long prefixes and differ near
        // the end; the length and final word separate them cheaply.
        self.len.hash(state);
        if let Some(w) = self.words.last() {
            w.hash(state);
        }
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BitString {
    /// Lexicographic order with shorter-prefix-first.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let cp = self.common_prefix_len(other);
        match (self.get(cp), other.get(cp)) {
            (None, None) => std::cmp::Ordering::Equal,
            (None, Some(_)) => std::cmp::Ordering::Less,
            (Some(_), None) => std::cmp::Ordering::Greater,
            (Some(a), Some(b)) => a.cmp(&b),
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::with_capacity(self.len);
        for b in self.iter() {
            s.push(if b { '1' } else { '0' });
        }
        f.write_str(&s)
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({}:{})", self.len, self)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        BitString::parse(&text).map_err(serde::de::Error::custom)
    }
}
