//! Fixed-width bit vectors used as plaintext, ciphertext and response blocks.
//!
//! Bit `i` of a block lives in byte `i / 8` at bit position `i % 8` (LSB
//! first) when the block is packed to bytes or hex.

use std::fmt;
use std::ops::BitXor;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_width, PufError, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Block {
    bits: Vec<bool>,
}

impl Block {
    pub fn zeros(width: usize) -> Self {
        Self {
            bits: vec![false; width],
        }
    }

    pub fn ones(width: usize) -> Self {
        Self {
            bits: vec![true; width],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn random<R: Rng + ?Sized>(width: usize, rng: &mut R) -> Self {
        Self {
            bits: (0..width).map(|_| rng.random::<bool>()).collect(),
        }
    }

    /// Parses a string of `0`/`1` characters, bit 0 first.
    pub fn from_bit_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(PufError::Format(format!(
                    "unexpected bit character {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::from_bits)
    }

    pub fn to_bit_str(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Rotates bit positions so that `out[(i + amount) % w] = self[i]`.
    pub fn rotate(&self, amount: usize) -> Self {
        let w = self.width();
        if w == 0 {
            return self.clone();
        }
        let mut out = vec![false; w];
        for (i, &b) in self.bits.iter().enumerate() {
            out[(i + amount) % w] = b;
        }
        Self { bits: out }
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    pub fn xor(&self, other: &Block) -> Result<Self> {
        check_width(self.width(), other.width())?;
        Ok(Self {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }

    pub fn hamming_distance(&self, other: &Block) -> Result<usize> {
        check_width(self.width(), other.width())?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes = vec![0u8; self.width().div_ceil(8)];
        for (i, &b) in self.bits.iter().enumerate() {
            if b {
                bytes[i / 8] |= 1 << (i % 8);
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8], width: usize) -> Result<Self> {
        if bytes.len() != width.div_ceil(8) {
            return Err(PufError::Format(format!(
                "{} bytes cannot hold a {width}-bit block",
                bytes.len()
            )));
        }
        let bits = (0..width)
            .map(|i| bytes[i / 8] >> (i % 8) & 1 == 1)
            .collect();
        Ok(Self { bits })
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str, width: usize) -> Result<Self> {
        let bytes = hex::decode(s.trim()).map_err(|e| PufError::Format(e.to_string()))?;
        Self::from_bytes(&bytes, width)
    }

    /// Width inferred as `8 * bytes`.
    pub fn from_hex_auto(s: &str) -> Result<Self> {
        let bytes = hex::decode(s.trim()).map_err(|e| PufError::Format(e.to_string()))?;
        Self::from_bytes(&bytes, bytes.len() * 8)
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.width() <= 64 {
            write!(f, "Block({})", self.to_bit_str())
        } else {
            write!(f, "Block[{}]({})", self.width(), self.to_hex())
        }
    }
}

impl BitXor for &Block {
    type Output = Block;

    /// Panics on width mismatch; use [`Block::xor`] for a checked version.
    fn bitxor(self, rhs: Self) -> Block {
        self.xor(rhs).expect("xor of blocks with different widths")
    }
}

impl From<Vec<bool>> for Block {
    fn from(bits: Vec<bool>) -> Self {
        Self::from_bits(bits)
    }
}

/// Serialized as a hex string prefixed by the bit width, e.g. `"4:0b"`, so
/// widths that are not a multiple of 8 survive a round trip.
impl Serialize for Block {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("{}:{}", self.width(), self.to_hex()))
    }
}

impl<'de> Deserialize<'de> for Block {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        let parsed = match s.split_once(':') {
            Some((w, h)) => w
                .parse::<usize>()
                .map_err(|e| PufError::Format(e.to_string()))
                .and_then(|w| Block::from_hex(h, w)),
            None => Block::from_hex_auto(&s),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}
