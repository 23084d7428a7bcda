//! Bit strings and the keyed bijective hash both parties apply before
//! comparing.
//!
//! The hash is a 4-round unbalanced Feistel network over the two halves of
//! the input. Each round XORs one half with a mixed function of the other, so
//! every round is an involution given the untouched half and the whole map is
//! a permutation of `{0,1}^n` for any key.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{QpcError, Result};
use crate::rng::Rng;

/// Longest string the simulator hashes; each Feistel half fits a `u64`.
pub const MAX_HASH_BITS: usize = 64;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const ROUNDS: u64 = 4;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

/// A non-empty string of bits. Position 1 is the leftmost character of the
/// text form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(QpcError::EmptyBitString);
        }
        Ok(Self { bits })
    }

    /// The low `n` bits of `value`, most significant first.
    pub fn from_u64(value: u64, n: usize) -> Result<Self> {
        check_hash_len(n)?;
        Ok(Self {
            bits: (0..n).map(|j| (value >> (n - 1 - j)) & 1 == 1).collect(),
        })
    }

    pub fn random(n: usize, rng: &mut Rng) -> Result<Self> {
        Self::new((0..n).map(|_| rng.bit() == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bit `i`, 1-based.
    ///
    /// # Panics
    ///
    /// Panics if `i` is 0 or greater than the length.
    pub fn bit(&self, i: usize) -> u8 {
        assert!(i >= 1 && i <= self.bits.len(), "bit index {i} out of range");
        self.bits[i - 1] as u8
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Copy with bit `i` (1-based) inverted.
    pub fn flipped(&self, i: usize) -> Self {
        let mut out = self.clone();
        out.bits[i - 1] = !out.bits[i - 1];
        out
    }

    fn segment_value(&self, start: usize, end: usize) -> u64 {
        self.bits[start..end].iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = QpcError;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(QpcError::InvalidBit(other)),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(bits)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Selects one concrete hash function. Both parties must hold the same key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct HashKey(pub u64);

fn check_hash_len(n: usize) -> Result<()> {
    if n == 0 || n > MAX_HASH_BITS {
        return Err(QpcError::LengthOutOfRange(n));
    }
    Ok(())
}

fn low_bits(x: u64, width: usize) -> u64 {
    if width >= 64 {
        x
    } else {
        x & ((1u64 << width) - 1)
    }
}

fn round_mask(key: HashKey, round: u64, other_half: u64, width: usize) -> u64 {
    let tweak = (round + 1).wrapping_mul(GOLDEN_GAMMA);
    low_bits(mix64(key.0 ^ tweak ^ other_half), width)
}

fn feistel_round(key: HashKey, round: u64, left: &mut u64, right: &mut u64, lw: usize, rw: usize) {
    if round % 2 == 0 {
        *left ^= round_mask(key, round, *right, lw);
    } else {
        *right ^= round_mask(key, round, *left, rw);
    }
}

fn split_halves(x: &BitString) -> (u64, u64, usize, usize) {
    let n = x.len();
    let lw = n / 2;
    (x.segment_value(0, lw), x.segment_value(lw, n), lw, n - lw)
}

fn join_halves(left: u64, right: u64, lw: usize, rw: usize) -> BitString {
    let mut bits = Vec::with_capacity(lw + rw);
    bits.extend((0..lw).map(|j| (left >> (lw - 1 - j)) & 1 == 1));
    bits.extend((0..rw).map(|j| (right >> (rw - 1 - j)) & 1 == 1));
    BitString { bits }
}

/// Keyed bijection on `{0,1}^n`, `1 <= n <= 64`.
pub fn hash(key: HashKey, x: &BitString) -> Result<BitString> {
    check_hash_len(x.len())?;
    let (mut left, mut right, lw, rw) = split_halves(x);
    for round in 0..ROUNDS {
        feistel_round(key, round, &mut left, &mut right, lw, rw);
    }
    Ok(join_halves(left, right, lw, rw))
}

/// Inverse of [`hash`] under the same key.
pub fn unhash(key: HashKey, y: &BitString) -> Result<BitString> {
    check_hash_len(y.len())?;
    let (mut left, mut right, lw, rw) = split_halves(y);
    for round in (0..ROUNDS).rev() {
        feistel_round(key, round, &mut left, &mut right, lw, rw);
    }
    Ok(join_halves(left, right, lw, rw))
}

pub fn hamming_distance(x: &BitString, y: &BitString) -> Result<usize> {
    if x.len() != y.len() {
        return Err(QpcError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(x.bits.iter().zip(&y.bits).filter(|(a, b)| a != b).count())
}
