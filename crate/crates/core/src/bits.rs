//! Fixed-length bit vectors.
//!
//! Bit 0 is the first emitted/parsed bit and the most significant digit of the
//! big-endian integer interpretation. Records, seeds, and generator outputs
//! are all `BitString`s.

use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;
use rand::Rng;

use crate::error::{Error, Result};

/// An ordered sequence of bits.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new() -> Self {
        BitString { bits: Vec::new() }
    }

    pub fn zeros(len: usize) -> Self {
        BitString {
            bits: vec![false; len],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    /// Uniform random bits.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        BitString {
            bits: (0..len).map(|_| rng.gen::<bool>()).collect(),
        }
    }

    /// The `len` low bits of `value`, big-endian (bit 0 most significant).
    pub fn from_uint(value: u64, len: usize) -> Self {
        let bits = (0..len)
            .map(|i| {
                let shift = len - 1 - i;
                shift < 64 && (value >> shift) & 1 == 1
            })
            .collect();
        BitString { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    pub fn push(&mut self, value: bool) {
        self.bits.push(value);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        BitString { bits }
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        BitString {
            bits: self.bits[start..end].to_vec(),
        }
    }

    /// Hamming distance. Both strings must have the same length.
    pub fn hamming(&self, other: &BitString) -> usize {
        assert_eq!(
            self.len(),
            other.len(),
            "hamming distance requires equal lengths"
        );
        self.bits
            .iter()
            .zip(other.bits.iter())
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Big-endian integer value: bit 0 is the most significant.
    pub fn to_biguint(&self) -> BigUint {
        let mut acc = BigUint::zero();
        for bit in &self.bits {
            acc <<= 1u8;
            if *bit {
                acc += 1u8;
            }
        }
        acc
    }

    /// Parse a string of `0`/`1` characters.
    pub fn parse(s: &str) -> Result<Self> {
        let mut bits = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => {
                    return Err(Error::param(format!(
                        "bit string may contain only 0/1, found {other:?} at offset {i}"
                    )))
                }
            }
        }
        Ok(BitString { bits })
    }

    /// Pack into 64-bit words for fast Hamming distance (bit 0 in the MSB of word 0).
    pub fn pack(&self) -> PackedBits {
        let words = self
            .bits
            .chunks(64)
            .map(|chunk| {
                let mut w = 0u64;
                for (i, bit) in chunk.iter().enumerate() {
                    if *bit {
                        w |= 1 << (63 - i);
                    }
                }
                w
            })
            .collect();
        PackedBits {
            words,
            len: self.bits.len(),
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for bit in &self.bits {
            f.write_str(if *bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

/// Word-packed bits; the hot path for distance computations over many candidates.
#[derive(Clone, PartialEq, Eq)]
pub struct PackedBits {
    words: Vec<u64>,
    len: usize,
}

impl PackedBits {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn hamming(&self, other: &PackedBits) -> usize {
        assert_eq!(self.len, other.len, "hamming distance requires equal lengths");
        self.words
            .iter()
            .zip(other.words.iter())
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn flip(&mut self, index: usize) {
        assert!(index < self.len, "bit {index} out of range for {} bits", self.len);
        self.words[index / 64] ^= 1u64 << (63 - (index % 64));
    }
}
