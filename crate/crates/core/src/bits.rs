//! Little-endian bit strings: bit `i` is the coefficient of `2^i`.

use core::fmt;
use core::str::FromStr;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Fixed-length bit string packed into 64-bit words.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid bit string character {ch:?} at position {pos}")]
pub struct BitParseError {
    pub pos: usize,
    pub ch: char,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut out = Self::zeros(len);
        for w in &mut out.words {
            *w = rng.random();
        }
        out.mask_tail();
        out
    }

    /// Unit vector `e_i`.
    pub fn unit(len: usize, i: usize) -> Self {
        let mut out = Self::zeros(len);
        out.set(i, true);
        out
    }

    /// Low `len` bits of `v`; higher bits are dropped.
    pub fn from_biguint(v: &BigUint, len: usize) -> Self {
        let mut out = Self::zeros(len);
        for (dst, src) in out.words.iter_mut().zip(v.iter_u64_digits()) {
            *dst = src;
        }
        out.mask_tail();
        out
    }

    pub fn from_u64(v: u64, len: usize) -> Self {
        let mut out = Self::zeros(len);
        if let Some(w) = out.words.first_mut() {
            *w = v;
        }
        out.mask_tail();
        out
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            out.set(i, b);
        }
        out
    }

    pub fn to_biguint(&self) -> BigUint {
        let mut bytes = Vec::with_capacity(self.words.len() * 8);
        for w in &self.words {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        BigUint::from_bytes_le(&bytes)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let v = self.get(i);
        self.set(i, !v);
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Inner product mod 2. Lengths must agree.
    pub fn dot(&self, other: &Self) -> bool {
        assert_eq!(self.len, other.len, "dot product of unequal lengths");
        let ones: u32 = self.words.iter().zip(&other.words).map(|(a, b)| (a & b).count_ones()).sum();
        ones & 1 == 1
    }

    pub fn xor(&self, other: &Self) -> Self {
        assert_eq!(self.len, other.len, "xor of unequal lengths");
        Self { len: self.len, words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect() }
    }

    pub fn xor_assign(&mut self, other: &Self) {
        assert_eq!(self.len, other.len, "xor of unequal lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Display for BitString {
    /// Index order: the first character is bit 0.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = BitParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = Self::zeros(s.chars().count());
        for (pos, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => out.set(pos, true),
                _ => return Err(BitParseError { pos, ch }),
            }
        }
        Ok(out)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn little_endian_round_trip() {
        let b = BitString::from_u64(9, 5);
        assert_eq!(b.to_string(), "10010");
        assert_eq!(b.to_biguint(), BigUint::from(9u32));
        assert_eq!("10010".parse::<BitString>().unwrap(), b);
    }

    #[test]
    fn dot_matches_naive_parity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [1, 5, 63, 64, 65, 130] {
            let a = BitString::random(len, &mut rng);
            let b = BitString::random(len, &mut rng);
            let naive = a.iter().zip(b.iter()).filter(|(x, y)| *x && *y).count() % 2 == 1;
            assert_eq!(a.dot(&b), naive);
            assert_eq!(a.xor(&b).xor(&b), a);
        }
    }

    #[test]
    fn biguint_truncates_to_length() {
        let v = BigUint::from(0b1111_0110u32);
        let b = BitString::from_biguint(&v, 4);
        assert_eq!(b.to_biguint(), BigUint::from(0b0110u32));
    }

    #[test]
    fn rejects_bad_characters() {
        assert_eq!("01x".parse::<BitString>(), Err(BitParseError { pos: 2, ch: 'x' }));
    }
}
