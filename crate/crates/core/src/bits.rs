//! Fixed-width binary vectors (`{0,1}^n`) and their signed view
//! (`{-1,+1}^n`), plus the exact cosine-similarity comparison shared by the
//! nearest-neighbor learner and the nearest-neighbor sequence task.

use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

/// An ordered vector of bits. Index 0 is the leftmost character in the string
/// form, e.g. `"0100"` has bit 1 set.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVec {
    bits: Vec<u8>,
}

impl BitVec {
    pub fn zeros(n: usize) -> Self {
        BitVec { bits: vec![0; n] }
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(&b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid("bit vector", format!("element {b} not in {{0,1}}")));
        }
        Ok(BitVec { bits })
    }

    /// All bits drawn i.i.d. uniform.
    pub fn uniform(n: usize, rng: &mut impl Rng) -> Self {
        BitVec {
            bits: (0..n).map(|_| rng.gen_range(0..=1u8)).collect(),
        }
    }

    /// Bit `i` set iff bit `i` of `index` is set; inverse of [`BitVec::index`].
    /// Used to enumerate all of `{0,1}^n` for truth tables (`n <= 64`).
    pub fn from_index(n: usize, index: u64) -> Self {
        assert!(n <= 64);
        BitVec {
            bits: (0..n).map(|i| ((index >> i) & 1) as u8).collect(),
        }
    }

    /// Position of this point in truth-table order (`n <= 64`).
    pub fn index(&self) -> u64 {
        assert!(self.len() <= 64);
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: u8) {
        assert!(value <= 1, "bit value {value} not in {{0,1}}");
        self.bits[i] = value;
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Number of set bits.
    pub fn ones(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    /// Inner product over raw bits (the count of positions set in both).
    pub fn dot(&self, other: &BitVec) -> u64 {
        debug_assert_eq!(self.len(), other.len());
        self.bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| (a & b) as u64)
            .sum()
    }

    pub fn xor(&self, other: &BitVec) -> BitVec {
        debug_assert_eq!(self.len(), other.len());
        BitVec {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(&a, &b)| a ^ b)
                .collect(),
        }
    }

    /// The `{-1,+1}` view: each bit b maps to 2b - 1.
    pub fn sign(&self) -> SignVec {
        SignVec {
            values: self.bits.iter().map(|&b| (2 * b as i8) - 1).collect(),
        }
    }

    /// Pack into a word, bit `i` of the result = element `i`. Requires n <= 64.
    pub fn mask(&self) -> u64 {
        self.index()
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", b)?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec({})", self)
    }
}

impl FromStr for BitVec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                other => Err(Error::Parse(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(|bits| BitVec { bits })
    }
}

impl Serialize for BitVec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitVec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The `{-1,+1}^n` view of a [`BitVec`]; threshold-style functions evaluate
/// on this representation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignVec {
    values: Vec<i8>,
}

impl SignVec {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> i8 {
        self.values[i]
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    /// Inverse of [`BitVec::sign`].
    pub fn to_bits(&self) -> BitVec {
        BitVec {
            bits: self.values.iter().map(|&v| ((v + 1) / 2) as u8).collect(),
        }
    }

    /// Integer dot product with another sign vector.
    pub fn dot(&self, other: &SignVec) -> i64 {
        debug_assert_eq!(self.len(), other.len());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| (a as i64) * (b as i64))
            .sum()
    }
}

/// Cosine similarity between raw bit vectors, with the all-zeros vector
/// assigned similarity 0 to everything.
pub fn cosine(a: &BitVec, b: &BitVec) -> f64 {
    let (na, nb) = (a.ones() as f64, b.ones() as f64);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dot(b) as f64 / (na * nb).sqrt()
}

/// Compare cos(a, q) against cos(b, q) exactly.
///
/// Each similarity is `dot / sqrt(norm2_self * norm2_query)`; the shared query
/// norm cancels, and the remaining comparison is done on cross-multiplied
/// integers so that mathematically equal similarities compare equal (no
/// floating-point drift), making smallest-index tie-breaking exact. All-zero
/// vectors have dot 0 and thus similarity 0, which is the defined convention.
pub fn cmp_cosine(dot_a: u64, norm2_a: u64, dot_b: u64, norm2_b: u64) -> Ordering {
    // sim_a <> sim_b  <=>  dot_a^2 * norm2_b <> dot_b^2 * norm2_a  (dots >= 0)
    let lhs = (dot_a as u128) * (dot_a as u128) * (norm2_b.max(1) as u128);
    let rhs = (dot_b as u128) * (dot_b as u128) * (norm2_a.max(1) as u128);
    lhs.cmp(&rhs)
}
