//! Oz-encoder: turns an operand magnitude into one one-hot term per set bit,
//! most significant first. Zero bits produce nothing, so the number of terms
//! is the number of cycles an OzMAC spends on the operand.

use serde::{Deserialize, Serialize};

use crate::types::{BitWidth, Operand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OneHotTerm {
    pub mask: u32,
    pub position: u8,
}

impl OneHotTerm {
    pub fn at(position: u8) -> Self {
        Self {
            mask: 1 << position,
            position,
        }
    }

    /// Mask as a zero-padded binary string of `width` digits.
    pub fn to_binary(&self, width: usize) -> String {
        format!("{:0width$b}", self.mask, width = width)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedStream {
    pub terms: Vec<OneHotTerm>,
    pub negative: bool,
    pub source_bits: BitWidth,
}

impl EncodedStream {
    pub fn cycles(&self) -> u32 {
        self.terms.len() as u32
    }

    pub fn positions(&self) -> impl Iterator<Item = u8> + '_ {
        self.terms.iter().map(|t| t.position)
    }
}

/// Per-cycle view of the encoder. Tracks the remaining set bits and emits the
/// highest one on every call to `next`.
#[derive(Debug, Clone)]
pub struct OzEncoder {
    remaining: u32,
}

impl OzEncoder {
    pub fn new(magnitude: u32) -> Self {
        Self {
            remaining: magnitude,
        }
    }
}

impl Iterator for OzEncoder {
    type Item = OneHotTerm;

    fn next(&mut self) -> Option<OneHotTerm> {
        if self.remaining == 0 {
            return None;
        }
        let position = (31 - self.remaining.leading_zeros()) as u8;
        self.remaining &= !(1u32 << position);
        Some(OneHotTerm::at(position))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for OzEncoder {}

pub fn oz_encode(op: &Operand) -> EncodedStream {
    EncodedStream {
        terms: OzEncoder::new(op.magnitude()).collect(),
        negative: op.is_negative(),
        source_bits: op.bits,
    }
}

pub fn oz_decode(stream: &EncodedStream) -> i64 {
    let magnitude: i64 = stream.terms.iter().map(|t| 1i64 << t.position).sum();
    if stream.negative {
        -magnitude
    } else {
        magnitude
    }
}

/// OzMAC cycles spent on `op`: the popcount of its magnitude.
pub fn cycle_count(op: &Operand) -> u32 {
    op.magnitude().count_ones()
}
