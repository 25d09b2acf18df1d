//! Constant-time initializable storage.
//!
//! [`LazyAllocator`] maintains an injective partial function `g` that
//! starts as the zero function even when its arrays hold arbitrary bits.
//! [`InitFreeArray`] builds on it to give an array whose never-written cells
//! read as a default value. [`Interleaved`] simulates `k` growable virtual
//! memories inside one word array.

use crate::bits::IntVec;
use crate::space::SpaceUsage;
use crate::wordops::{floor_log_u64, lowest_one, mw};
use crate::{bits_for, ceil_log2, Error, Result};

/// The "initialization on the fly" allocator.
///
/// `G[l]` stores `g(l) - 1` and `G_inv[g - 1]` stores `l - 1`, so both arrays
/// need only `ceil(log2 n)` bits per entry. An entry of `G` is trusted only
/// when it is below `mu` and confirmed by `G_inv`.
#[derive(Clone, Debug)]
pub struct LazyAllocator {
    n: usize,
    mu: usize,
    g: IntVec,
    g_inv: IntVec,
}

impl LazyAllocator {
    pub fn new(n: usize) -> Self {
        let w = ceil_log2(n as u64) as usize;
        LazyAllocator { n, mu: 0, g: IntVec::new(n, w), g_inv: IntVec::new(n, w) }
    }

    /// Same as [`new`](Self::new) but over memory holding arbitrary bits.
    pub fn with_garbage(n: usize, seed: u64) -> Self {
        let w = ceil_log2(n as u64) as usize;
        LazyAllocator {
            n,
            mu: 0,
            g: IntVec::with_garbage(n, w, seed),
            g_inv: IntVec::with_garbage(n, w, seed ^ 0x5555),
        }
    }

    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn allocated(&self) -> usize {
        self.mu
    }

    fn check(&self, l: usize) -> Result<()> {
        crate::check_range("element", l as u64, 1, self.n as u64)
    }

    /// `g(l)`, 0 if unallocated.
    #[inline]
    pub fn g_lookup(&self, l: usize) -> Result<usize> {
        self.check(l)?;
        Ok(self.lookup_unchecked(l))
    }

    #[inline]
    pub(crate) fn lookup_unchecked(&self, l: usize) -> usize {
        let v = self.g.get(l - 1) as usize;
        if v < self.mu && self.g_inv.get(v) as usize == l - 1 {
            v + 1
        } else {
            0
        }
    }

    /// The `l` with `g(l) = v`, for `1 <= v <= allocated()`.
    #[inline]
    pub(crate) fn inverse_unchecked(&self, v: usize) -> usize {
        self.g_inv.get(v - 1) as usize + 1
    }

    /// Gives `l` the next unused value if it has none; returns `g(l)`.
    pub fn allocate(&mut self, l: usize) -> Result<usize> {
        self.check(l)?;
        let cur = self.lookup_unchecked(l);
        if cur != 0 {
            return Ok(cur);
        }
        self.g.set(l - 1, self.mu as u64);
        self.g_inv.set(self.mu, (l - 1) as u64);
        self.mu += 1;
        Ok(self.mu)
    }

    /// Bits for `G`, `G_inv` and `mu` (word-rounded per array).
    pub fn bits_exact(&self) -> u64 {
        2 * self.n as u64 * ceil_log2(self.n as u64) as u64 + bits_for(self.n as u64) as u64
    }
}

impl SpaceUsage for LazyAllocator {
    fn bits_used(&self) -> u64 {
        self.g.bits_used() + self.g_inv.bits_used() + 64
    }
}

/// Value of a never-written cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefaultRule {
    /// Every cell defaults to the same value.
    Constant(u64),
    /// Cell `l` defaults to `(mul * l + add) mod 2^width`.
    Affine { mul: u64, add: u64 },
}

impl DefaultRule {
    #[inline]
    fn eval(&self, l: usize, mask: u64) -> u64 {
        match *self {
            DefaultRule::Constant(v) => v & mask,
            DefaultRule::Affine { mul, add } => mul.wrapping_mul(l as u64).wrapping_add(add) & mask,
        }
    }
}

/// Array of `len` cells of `width` bits whose unwritten cells read as a
/// default. Initialization tracking is per 64-bit segment: the first write
/// into a segment clears it, and the stored pattern of a cell swaps the
/// roles of `0` and the cell's default, so a cleared cell reads as its
/// default.
#[derive(Clone, Debug)]
pub struct InitFreeArray {
    cells: IntVec,
    segments: LazyAllocator,
    rule: DefaultRule,
    mask: u64,
}

impl InitFreeArray {
    pub fn new(len: usize, width: usize, rule: DefaultRule) -> Self {
        let cells = IntVec::new(len, width);
        let segs = cells.words().len();
        Self::assemble(cells, LazyAllocator::new(segs), rule)
    }

    pub fn with_garbage(len: usize, width: usize, rule: DefaultRule, seed: u64) -> Self {
        let cells = IntVec::with_garbage(len, width, seed);
        let segs = cells.words().len();
        Self::assemble(cells, LazyAllocator::with_garbage(segs, seed.rotate_left(17)), rule)
    }

    fn assemble(cells: IntVec, segments: LazyAllocator, rule: DefaultRule) -> Self {
        let w = cells.width();
        let mask = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
        InitFreeArray { cells, segments, rule, mask }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.len() == 0
    }

    pub fn width(&self) -> usize {
        self.cells.width()
    }

    #[inline]
    fn seg_range(&self, l: usize) -> (usize, usize) {
        let w = self.cells.width();
        let lo = (l - 1) * w;
        (lo / 64 + 1, (lo + w - 1) / 64 + 1)
    }

    #[inline]
    fn swap(&self, v: u64, l: usize) -> u64 {
        let d = self.rule.eval(l, self.mask);
        if v == d {
            0
        } else if v == 0 {
            d
        } else {
            v
        }
    }

    /// Cell `l` (1-based).
    #[inline]
    pub fn read(&self, l: usize) -> Result<u64> {
        crate::check_range("cell", l as u64, 1, self.len() as u64)?;
        Ok(self.read_unchecked(l))
    }

    #[inline]
    pub(crate) fn read_unchecked(&self, l: usize) -> u64 {
        if self.cells.width() == 0 {
            return 0;
        }
        let (a, b) = self.seg_range(l);
        if self.segments.lookup_unchecked(a) == 0 || (b != a && self.segments.lookup_unchecked(b) == 0) {
            return self.rule.eval(l, self.mask);
        }
        self.swap(self.cells.get(l - 1), l)
    }

    pub fn write(&mut self, l: usize, v: u64) -> Result<()> {
        crate::check_range("cell", l as u64, 1, self.len() as u64)?;
        if v & !self.mask != 0 {
            return Err(Error::OutOfRange { what: "cell value", value: v });
        }
        self.write_unchecked(l, v);
        Ok(())
    }

    #[inline]
    pub(crate) fn write_unchecked(&mut self, l: usize, v: u64) {
        if self.cells.width() == 0 {
            return;
        }
        let (a, b) = self.seg_range(l);
        for s in a..=b {
            if self.segments.lookup_unchecked(s) == 0 {
                self.segments.allocate(s).expect("segment in range");
                self.cells.words_mut()[s - 1] = 0;
            }
        }
        let stored = self.swap(v, l);
        self.cells.set(l - 1, stored);
    }
}

impl SpaceUsage for InitFreeArray {
    fn bits_used(&self) -> u64 {
        self.cells.bits_used() + self.segments.bits_used()
    }
}

/// `k` growable virtual memories stored in one word array.
///
/// While the total content is at most one word, the layout is a unary
/// header of the stream lengths followed by the concatenated contents.
/// Beyond that, word `j` of stream `i` lives at address `j k + i`.
#[derive(Clone, Debug)]
pub struct Interleaved {
    k: usize,
    lens: Vec<usize>,
    words: Vec<u64>,
    round_robin: bool,
}

impl Interleaved {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1);
        Interleaved { k, lens: vec![0; k], words: vec![0; Self::small_words(k)], round_robin: false }
    }

    fn small_words(k: usize) -> usize {
        (64 + k + 64).div_ceil(64)
    }

    pub fn is_round_robin(&self) -> bool {
        self.round_robin
    }

    pub fn len_bits(&self, i: usize) -> usize {
        self.lens[i]
    }

    /// Global word address of word `j` of stream `i` (0-based) in the
    /// round-robin layout.
    pub fn address(k: usize, i: usize, j: usize) -> usize {
        j * k + i
    }

    fn total(&self) -> usize {
        self.lens.iter().sum()
    }

    // Small layout: header = for each stream, len_i ones then a zero.
    fn header_len(&self) -> usize {
        self.total() + self.k
    }

    /// Bit offset of stream `i`'s content inside the small layout, found by
    /// skipping `i` zeros of the unary header.
    fn small_offset(&self, i: usize) -> usize {
        let mut ones_before = 0;
        let mut zeros = 0;
        let mut pos = 0;
        while zeros < i {
            let chunk = mw::get_bits(&self.words, pos, 64.min(self.header_len() - pos));
            let inv = !chunk & if self.header_len() - pos >= 64 { u64::MAX } else { (1u64 << (self.header_len() - pos)) - 1 };
            let mut z = inv;
            while z != 0 && zeros < i {
                let b = floor_log_u64(lowest_one(z)).unwrap() as usize;
                zeros += 1;
                if zeros == i {
                    ones_before = pos + b - (zeros - 1);
                }
                z &= z - 1;
            }
            pos += 64;
        }
        self.header_len() + ones_before
    }

    fn read_bits_small(&self, i: usize) -> u64 {
        let off = self.small_offset(i);
        mw::get_bits(&self.words, off, self.lens[i])
    }

    fn snapshot(&self) -> Vec<Vec<u64>> {
        (0..self.k)
            .map(|i| {
                let nw = self.lens[i].div_ceil(64);
                (0..nw).map(|j| self.read_word(i, j)).collect()
            })
            .collect()
    }

    fn rebuild(&mut self, contents: Vec<Vec<u64>>) {
        let total = self.total();
        if total <= 64 {
            self.round_robin = false;
            self.words = vec![0; Self::small_words(self.k)];
            let mut pos = 0;
            for i in 0..self.k {
                for _ in 0..self.lens[i] {
                    mw::set_bits(&mut self.words, pos, 1, 1);
                    pos += 1;
                }
                pos += 1;
            }
            for (i, c) in contents.iter().enumerate() {
                let v = c.first().copied().unwrap_or(0);
                let l = self.lens[i];
                mw::set_bits(&mut self.words, pos, l, v);
                pos += l;
            }
        } else {
            self.round_robin = true;
            let per = self.lens.iter().map(|l| l.div_ceil(64)).max().unwrap_or(0);
            self.words = vec![0; per * self.k];
            for (i, c) in contents.iter().enumerate() {
                for (j, &v) in c.iter().enumerate() {
                    self.words[Self::address(self.k, i, j)] = v;
                }
            }
        }
    }

    /// Changes the length of stream `i`; new bits read as 0.
    pub fn set_len(&mut self, i: usize, bits: usize) {
        let mut contents = self.snapshot();
        let old = self.lens[i];
        self.lens[i] = bits;
        let nw = bits.div_ceil(64);
        contents[i].resize(nw, 0);
        if bits < old {
            mw::mask(&mut contents[i], bits);
        }
        self.rebuild(contents);
    }

    /// Word `j` of stream `i`; bits past the stream length read as 0.
    pub fn read_word(&self, i: usize, j: usize) -> u64 {
        if j * 64 >= self.lens[i] {
            return 0;
        }
        if self.round_robin {
            self.words[Self::address(self.k, i, j)]
        } else {
            self.read_bits_small(i)
        }
    }

    /// Overwrites word `j` of stream `i` (bits past the length are dropped).
    pub fn write_word(&mut self, i: usize, j: usize, v: u64) {
        let len = self.lens[i];
        if j * 64 >= len {
            return;
        }
        let keep = (len - j * 64).min(64);
        if self.round_robin {
            let a = Self::address(self.k, i, j);
            mw::set_bits(&mut self.words, a * 64, keep, v);
        } else {
            let off = self.small_offset(i);
            mw::set_bits(&mut self.words, off, keep, v);
        }
    }
}

impl SpaceUsage for Interleaved {
    fn bits_used(&self) -> u64 {
        self.words.bits_used() + self.k as u64 * 64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn allocator_examples() {
        let mut a = LazyAllocator::new(10);
        a.allocate(7).unwrap();
        assert_eq!(a.g_lookup(7).unwrap(), 1);
        assert_eq!(a.allocated(), 1);
        a.allocate(7).unwrap();
        assert_eq!((a.g_lookup(7).unwrap(), a.allocated()), (1, 1));
        assert!(a.allocate(0).is_err());
        assert!(a.g_lookup(11).is_err());
    }

    #[test]
    fn allocator_over_garbage() {
        for seed in 0..1000 {
            let n = 1 + (seed as usize % 300);
            let mut a = LazyAllocator::with_garbage(n, seed);
            assert!((1..=n).all(|l| a.g_lookup(l).unwrap() == 0));
            if n >= 3 {
                a.allocate(3).unwrap();
                assert_eq!(a.g_lookup(3).unwrap(), 1);
            }
        }
    }

    #[test]
    fn allocator_bijection_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 5, 64, 1000] {
            let mut a = LazyAllocator::with_garbage(n, n as u64);
            let mut oracle = std::collections::HashMap::new();
            for _ in 0..100_000 / n.max(10) * 10 {
                let l = rng.gen_range(1..=n);
                if rng.gen_bool(0.3) {
                    let next = oracle.len() + 1;
                    oracle.entry(l).or_insert(next);
                    a.allocate(l).unwrap();
                }
                assert_eq!(a.g_lookup(l).unwrap(), oracle.get(&l).copied().unwrap_or(0));
            }
            for l in 1..=n {
                a.allocate(l).unwrap();
            }
            let mut seen: Vec<usize> = (1..=n).map(|l| a.g_lookup(l).unwrap()).collect();
            seen.sort();
            assert_eq!(seen, (1..=n).collect::<Vec<_>>());
            let bound = 2 * n as u64 * ceil_log2(n as u64) as u64 + bits_for(n as u64) as u64;
            assert!(a.bits_exact() <= bound);
            assert!(a.bits_used() <= bound + 3 * 64);
        }
    }

    #[test]
    fn array_round_trip_and_defaults() {
        let mut a = InitFreeArray::with_garbage(100, 5, DefaultRule::Constant(0), 99);
        assert_eq!(a.read(5).unwrap(), 0);
        a.write(5, 9).unwrap();
        assert_eq!(a.read(5).unwrap(), 9);
        assert!(a.write(5, 32).is_err());
        assert!(a.read(101).is_err());
        let b = InitFreeArray::with_garbage(50, 7, DefaultRule::Affine { mul: 1, add: 0 }, 3);
        assert!((1..=50).all(|l| b.read(l).unwrap() == l as u64));
    }

    #[test]
    fn array_garbage_patterns() {
        for seed in 0..1000u64 {
            let w = 1 + (seed as usize % 13);
            let rule = if seed % 2 == 0 { DefaultRule::Constant(seed % 3) } else { DefaultRule::Affine { mul: 3, add: 1 } };
            let mut a = InitFreeArray::with_garbage(40, w, rule, seed);
            let mask = (1u64 << w) - 1;
            for l in 1..=40 {
                assert_eq!(a.read(l).unwrap(), rule.eval(l, mask));
            }
            a.write(17, 0).unwrap();
            for l in 1..=40 {
                let want = if l == 17 { 0 } else { rule.eval(l, mask) };
                assert_eq!(a.read(l).unwrap(), want);
            }
        }
    }

    #[test]
    fn array_trace_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (len, w) in [(1usize, 1usize), (200, 3), (1000, 7), (333, 64), (64, 0)] {
            let rule = DefaultRule::Affine { mul: 5, add: 2 };
            let mask = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
            let mut a = InitFreeArray::with_garbage(len, w, rule, len as u64);
            let mut oracle: Vec<u64> = (1..=len).map(|l| if w == 0 { 0 } else { rule.eval(l, mask) }).collect();
            for _ in 0..100_000 {
                let l = rng.gen_range(1..=len);
                if rng.gen_bool(0.5) {
                    let v = rng.gen::<u64>() & mask;
                    a.write(l, v).unwrap();
                    oracle[l - 1] = v;
                }
                assert_eq!(a.read(l).unwrap(), oracle[l - 1]);
            }
        }
    }

    #[test]
    fn interleave_layouts() {
        assert_eq!(Interleaved::address(1, 0, 5), 5);
        let mut m = Interleaved::new(2);
        m.set_len(0, 640);
        m.set_len(1, 192);
        assert!(m.is_round_robin());
        for j in 0..10 {
            assert_eq!(Interleaved::address(2, 0, j) % 2, 0);
        }
        for j in 0..3 {
            assert_eq!(Interleaved::address(2, 1, j) % 2, 1);
        }
    }

    #[test]
    fn interleave_shadow_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let k = 4;
        let mut m = Interleaved::new(k);
        let mut shadow: Vec<Vec<u64>> = vec![Vec::new(); k];
        let mut lens = vec![0usize; k];
        for step in 0..20_000 {
            let i = rng.gen_range(0..k);
            if step % 7 == 0 {
                let nl = if rng.gen_bool(0.5) { rng.gen_range(0..20) } else { rng.gen_range(0..400) };
                m.set_len(i, nl);
                lens[i] = nl;
                shadow[i].resize(nl.div_ceil(64), 0);
                mw::mask(&mut shadow[i], nl);
            } else if lens[i] > 0 {
                let j = rng.gen_range(0..lens[i].div_ceil(64));
                let v: u64 = rng.gen();
                m.write_word(i, j, v);
                let keep = (lens[i] - j * 64).min(64);
                shadow[i][j] = if keep == 64 { v } else { v & ((1u64 << keep) - 1) };
            }
            for s in 0..k {
                for j in 0..lens[s].div_ceil(64) {
                    assert_eq!(m.read_word(s, j), shadow[s][j], "step {step}");
                }
            }
            assert_eq!(m.is_round_robin(), lens.iter().sum::<usize>() > 64);
        }
    }
}
