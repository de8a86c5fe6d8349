use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Descriptor width used when none is given (FREAK descriptors are 512 bits).
pub const DEFAULT_DIM: usize = 512;

const WORD_BITS: usize = 64;

/// A packed bit vector of a fixed, runtime-chosen width.
///
/// Bit `i` lives in bit `i % 64` of word `i / 64`. Viewed as little-endian
/// bytes this is bit `i % 8` of byte `i / 8`, the same layout the on-disk
/// format uses. Padding bits past `dim` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryDescriptor {
    dim: usize,
    words: Vec<u64>,
}

impl BinaryDescriptor {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            words: vec![0; words_for(dim)],
        }
    }

    pub fn ones(dim: usize) -> Self {
        let mut d = Self {
            dim,
            words: vec![u64::MAX; words_for(dim)],
        };
        d.clear_padding();
        d
    }

    /// Builds a descriptor from packed words, clearing any padding bits.
    pub fn from_words(dim: usize, words: Vec<u64>) -> Result<Self> {
        if words.len() != words_for(dim) {
            return Err(Error::DimMismatch {
                expected: words_for(dim) * WORD_BITS,
                actual: words.len() * WORD_BITS,
            });
        }
        let mut d = Self { dim, words };
        d.clear_padding();
        Ok(d)
    }

    /// Builds a descriptor from `ceil(dim / 8)` bytes in the on-disk bit order.
    pub fn from_bytes(dim: usize, bytes: &[u8]) -> Result<Self> {
        let expected = bytes_for(dim);
        if bytes.len() != expected {
            return Err(Error::DimMismatch {
                expected: expected * 8,
                actual: bytes.len() * 8,
            });
        }
        let mut words = vec![0u64; words_for(dim)];
        for (w, chunk) in words.iter_mut().zip(bytes.chunks(8)) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            *w = u64::from_le_bytes(buf);
        }
        let mut d = Self { dim, words };
        d.clear_padding();
        Ok(d)
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut d = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                d.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
            }
        }
        d
    }

    /// Writes the descriptor as `ceil(dim / 8)` bytes in the on-disk bit order.
    pub fn write_bytes(&self, out: &mut Vec<u8>) {
        let n = bytes_for(self.dim);
        let start = out.len();
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(start + n);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(bytes_for(self.dim));
        self.write_bytes(&mut out);
        out
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Returns whether bit `pos` is set.
    pub fn test_bit(&self, pos: usize) -> Result<bool> {
        if pos >= self.dim {
            return Err(Error::BitOutOfRange { pos, dim: self.dim });
        }
        Ok(self.bit(pos))
    }

    /// Unchecked-range variant of [`test_bit`](Self::test_bit) for the index
    /// hot paths, whose bit positions are validated at build time.
    #[inline]
    pub(crate) fn bit(&self, pos: usize) -> bool {
        self.words[pos / WORD_BITS] & (1u64 << (pos % WORD_BITS)) != 0
    }

    pub fn set_bit(&mut self, pos: usize, value: bool) -> Result<()> {
        if pos >= self.dim {
            return Err(Error::BitOutOfRange { pos, dim: self.dim });
        }
        let mask = 1u64 << (pos % WORD_BITS);
        if value {
            self.words[pos / WORD_BITS] |= mask;
        } else {
            self.words[pos / WORD_BITS] &= !mask;
        }
        Ok(())
    }

    pub fn flip_bit(&mut self, pos: usize) -> Result<()> {
        if pos >= self.dim {
            return Err(Error::BitOutOfRange { pos, dim: self.dim });
        }
        self.words[pos / WORD_BITS] ^= 1u64 << (pos % WORD_BITS);
        Ok(())
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of differing bits; panics on mismatched widths. See [`hamming`].
    #[inline]
    pub(crate) fn distance_unchecked(&self, other: &Self) -> u32 {
        debug_assert_eq!(self.dim, other.dim);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    fn clear_padding(&mut self) {
        let rem = self.dim % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Debug for BinaryDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BinaryDescriptor({} bits, ", self.dim)?;
        for w in self.words.iter().rev() {
            write!(f, "{w:016x}")?;
        }
        write!(f, ")")
    }
}

/// Hamming distance: the number of bit positions where `a` and `b` differ.
pub fn hamming(a: &BinaryDescriptor, b: &BinaryDescriptor) -> Result<u32> {
    if a.dim != b.dim {
        return Err(Error::DimMismatch {
            expected: a.dim,
            actual: b.dim,
        });
    }
    Ok(a.distance_unchecked(b))
}

pub(crate) fn words_for(dim: usize) -> usize {
    dim.div_ceil(WORD_BITS)
}

pub(crate) fn bytes_for(dim: usize) -> usize {
    dim.div_ceil(8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, dim: usize) -> BinaryDescriptor {
        let bits: Vec<bool> = (0..dim).map(|_| rng.random()).collect();
        BinaryDescriptor::from_bits(&bits)
    }

    fn naive_distance(a: &BinaryDescriptor, b: &BinaryDescriptor) -> u32 {
        (0..a.dim())
            .filter(|&i| a.test_bit(i).unwrap() != b.test_bit(i).unwrap())
            .count() as u32
    }

    #[test]
    fn hamming_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random(&mut rng, 512);
        assert_eq!(hamming(&x, &x).unwrap(), 0);
        assert_eq!(
            hamming(&BinaryDescriptor::zeros(512), &BinaryDescriptor::ones(512)).unwrap(),
            512
        );

        let mut a = BinaryDescriptor::zeros(512);
        a.set_bit(0, true).unwrap();
        let mut b = BinaryDescriptor::zeros(512);
        for i in 0..3 {
            b.set_bit(i, true).unwrap();
        }
        assert_eq!(hamming(&a, &b).unwrap(), 2);
    }

    #[test]
    fn hamming_rejects_mismatched_dims() {
        let err =
            hamming(&BinaryDescriptor::zeros(512), &BinaryDescriptor::zeros(256)).unwrap_err();
        assert_eq!(
            err,
            Error::DimMismatch {
                expected: 512,
                actual: 256
            }
        );
    }

    #[test]
    fn hamming_matches_bit_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..1200 {
            let dim = [512, 100, 7, 64, 65][i % 5];
            let a = random(&mut rng, dim);
            let b = random(&mut rng, dim);
            let d = hamming(&a, &b).unwrap();
            assert_eq!(d, naive_distance(&a, &b));
            assert_eq!(d, hamming(&b, &a).unwrap());
            assert!(d as usize <= dim);
            assert_eq!(d == 0, a == b);
        }
    }

    #[test]
    fn triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..500 {
            let (a, b, c) = (
                random(&mut rng, 512),
                random(&mut rng, 512),
                random(&mut rng, 512),
            );
            let ab = hamming(&a, &b).unwrap();
            let bc = hamming(&b, &c).unwrap();
            let ac = hamming(&a, &c).unwrap();
            assert!(ac <= ab + bc);
        }
    }

    #[test]
    fn test_bit_examples() {
        assert!(BinaryDescriptor::ones(512).test_bit(300).unwrap());
        assert!(!BinaryDescriptor::zeros(512).test_bit(0).unwrap());
        let mut d = BinaryDescriptor::zeros(512);
        d.set_bit(7, true).unwrap();
        assert!(d.test_bit(7).unwrap());
        assert!(!d.test_bit(6).unwrap());
        assert_eq!(
            d.test_bit(512),
            Err(Error::BitOutOfRange { pos: 512, dim: 512 })
        );
    }

    #[test]
    fn padding_stays_zero() {
        let d = BinaryDescriptor::ones(70);
        assert_eq!(d.words()[1], 0b11_1111);
        assert_eq!(d.count_ones(), 70);
        let d = BinaryDescriptor::from_words(70, alloc::vec![u64::MAX, u64::MAX]).unwrap();
        assert_eq!(d, BinaryDescriptor::ones(70));
        let d = BinaryDescriptor::from_bytes(12, &[0xff, 0xff]).unwrap();
        assert_eq!(d.count_ones(), 12);
    }

    #[test]
    fn byte_layout() {
        // bit 9 = bit 1 of byte 1
        let d = BinaryDescriptor::from_bytes(16, &[0x00, 0x02]).unwrap();
        assert!(d.test_bit(9).unwrap());
        assert_eq!(d.count_ones(), 1);
        assert_eq!(d.to_bytes(), alloc::vec![0x00, 0x02]);
        let d = BinaryDescriptor::from_bytes(512, &[0xA5; 64]).unwrap();
        assert_eq!(d.to_bytes(), alloc::vec![0xA5; 64]);
        assert!(d.test_bit(0).unwrap() && !d.test_bit(1).unwrap() && d.test_bit(2).unwrap());
    }
}
