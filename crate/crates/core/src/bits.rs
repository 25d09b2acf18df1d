//! Plain bit vectors and fixed-width integer arrays.

use crate::space::SpaceUsage;
use crate::wordops::mw;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Words filled with a reproducible pseudo-random pattern, standing in for
/// uninitialized memory.
pub fn garbage_words(n: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl BitVec {
    pub fn new(len: usize) -> Self {
        BitVec { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit `i`, 0-based.
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, b: bool) {
        debug_assert!(i < self.len);
        if b {
            self.words[i / 64] |= 1u64 << (i % 64);
        } else {
            self.words[i / 64] &= !(1u64 << (i % 64));
        }
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

impl SpaceUsage for BitVec {
    fn bits_used(&self) -> u64 {
        self.words.len() as u64 * 64
    }
}

/// `len` cells of `width` bits each (width may be 0).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntVec {
    words: Vec<u64>,
    len: usize,
    width: usize,
}

impl IntVec {
    pub fn new(len: usize, width: usize) -> Self {
        assert!(width <= 64);
        IntVec { words: vec![0; (len * width).div_ceil(64)], len, width }
    }

    /// Cells start out holding arbitrary bits.
    pub fn with_garbage(len: usize, width: usize, seed: u64) -> Self {
        assert!(width <= 64);
        IntVec { words: garbage_words((len * width).div_ceil(64), seed), len, width }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Cell `i`, 0-based.
    #[inline]
    pub fn get(&self, i: usize) -> u64 {
        debug_assert!(i < self.len);
        mw::get_bits(&self.words, i * self.width, self.width)
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: u64) {
        debug_assert!(i < self.len);
        debug_assert!(self.width == 64 || v >> self.width == 0);
        mw::set_bits(&mut self.words, i * self.width, self.width, v);
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub fn fill_garbage(&mut self, seed: u64) {
        let n = self.words.len();
        self.words = garbage_words(n, seed);
    }
}

impl SpaceUsage for IntVec {
    fn bits_used(&self) -> u64 {
        self.words.len() as u64 * 64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intvec_round_trip_all_widths() {
        for width in 0..=64usize {
            let mut v = IntVec::with_garbage(37, width, width as u64);
            let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
            for i in 0..37 {
                v.set(i, (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) & mask);
            }
            for i in 0..37 {
                assert_eq!(v.get(i), (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) & mask);
            }
        }
    }

    #[test]
    fn bitvec_basics() {
        let mut b = BitVec::new(130);
        b.set(0, true);
        b.set(129, true);
        assert!(b.get(0) && b.get(129) && !b.get(64));
        assert_eq!(b.count_ones(), 2);
        b.set(0, false);
        assert_eq!(b.count_ones(), 1);
    }
}
