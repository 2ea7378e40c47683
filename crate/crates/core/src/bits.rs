use std::fmt;
use std::ops::BitXor;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A binary vector with one byte per entry, each entry in {0, 1}.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct BitVector(Vec<u8>);

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        BitVector(vec![0; len])
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidArgument(format!(
                "bit vector entry {pos} is {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(BitVector(bits))
    }

    /// Builds a unit vector with a one at `index`.
    pub fn unit(len: usize, index: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[index] = 1;
        v
    }

    /// Parses a string of '0'/'1' characters.
    pub fn parse(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::InvalidArgument(format!("not a bit: {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()
            .map(BitVector)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        self.0[i] = bit as u8;
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.0[i] ^= 1;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.0.iter().copied()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&b| b == 0)
    }

    /// Hamming weight.
    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Number of positions where `self` and `other` differ.
    pub fn distance(&self, other: &BitVector) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }

    /// Packs the bits LSB-first into `ceil(len / 8)` bytes.
    pub fn to_packed(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.0.len().div_ceil(8)];
        for (i, &b) in self.0.iter().enumerate() {
            out[i / 8] |= b << (i % 8);
        }
        out
    }

    /// Inverse of [`BitVector::to_packed`].
    pub fn from_packed(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::LengthMismatch {
                expected: len.div_ceil(8),
                got: bytes.len(),
            });
        }
        Ok(BitVector(
            (0..len).map(|i| (bytes[i / 8] >> (i % 8)) & 1).collect(),
        ))
    }
}

impl TryFrom<Vec<u8>> for BitVector {
    type Error = Error;

    fn try_from(bits: Vec<u8>) -> Result<Self> {
        BitVector::from_bits(bits)
    }
}

impl From<BitVector> for Vec<u8> {
    fn from(v: BitVector) -> Self {
        v.0
    }
}

impl FromIterator<bool> for BitVector {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        BitVector(iter.into_iter().map(u8::from).collect())
    }
}

impl BitXor for &BitVector {
    type Output = BitVector;

    fn bitxor(self, rhs: &BitVector) -> BitVector {
        assert_eq!(self.len(), rhs.len(), "xor of bit vectors with different lengths");
        BitVector(self.0.iter().zip(&rhs.0).map(|(a, b)| a ^ b).collect())
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_binary_entries() {
        assert!(BitVector::from_bits(vec![0, 1, 2]).is_err());
        assert!(BitVector::parse("01x").is_err());
    }

    #[test]
    fn packing_is_lsb_first() {
        let v = BitVector::parse("1000000011").unwrap();
        assert_eq!(v.to_packed(), vec![0b0000_0001, 0b0000_0011]);
        assert_eq!(BitVector::from_packed(&v.to_packed(), 10).unwrap(), v);
        assert!(BitVector::from_packed(&[0], 10).is_err());
    }

    #[test]
    fn xor_and_weight() {
        let a = BitVector::parse("1100").unwrap();
        let b = BitVector::parse("1010").unwrap();
        assert_eq!(&a ^ &b, BitVector::parse("0110").unwrap());
        assert_eq!(a.distance(&b), 2);
        assert_eq!(a.weight(), 2);
    }
}
