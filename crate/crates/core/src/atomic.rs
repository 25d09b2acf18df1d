//! The packed color array: `n` fields of `ceil(log2 c)` bits with
//! constant-time color/setcolor and broadword successor/predecessor.
//!
//! Neighbor search xors every field with the target color and locates zero
//! fields with the test-bit transform, one chunk of whole fields at a time.
//! A chunk is the smallest run of limbs holding a whole number of fields.

use crate::space::SpaceUsage;
use crate::traits::{ColorDict, Iterable, Successor, SuccessorIter};
use crate::wordops::{fill_ones, floor_log_u64, lowest_one, mw, zero_fields_to_flags};
use crate::{bits_for, ceil_log2, Result};

/// Chunk geometry and constants for field width `f`.
#[derive(Clone, Debug)]
pub struct FieldScanner {
    f: usize,
    /// Limbs per chunk.
    limbs: usize,
    /// Fields per chunk.
    per: usize,
    ones: Vec<u64>,
    test: Vec<u64>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl FieldScanner {
    pub fn new(f: usize) -> Self {
        assert!((1..=64).contains(&f));
        let g = gcd(f, 64);
        let limbs = f / g;
        let per = 64 / g;
        let mut ones = vec![0u64; limbs];
        fill_ones(&mut ones, per, f);
        let mut test = ones.clone();
        mw::shl(&mut test, f - 1);
        FieldScanner { f, limbs, per, ones, test }
    }

    pub fn f(&self) -> usize {
        self.f
    }

    /// Match flags for chunk `q` of `data`: the test bit of each field equal
    /// to `j` is set, restricted to fields in `[lo, hi)` (absolute, 0-based).
    #[inline]
    fn chunk_flags(&self, data: &[u64], q: usize, j: u64, lo: usize, hi: usize, buf: &mut [u64; 64], scratch: &mut [u64; 64]) {
        let f = self.f;
        let base = q * self.limbs;
        let l = self.limbs;
        if l == 1 {
            let jpat = j.wrapping_mul(self.ones[0]);
            let t = self.test[0];
            let x = data.get(base).copied().unwrap_or(0) ^ jpat;
            let y = x & t;
            let z = (x - y) | (y >> (f - 1));
            buf[0] = t.wrapping_sub(z) & t;
        } else {
            let mut jpat = [0u64; 64];
            mw::mul_trunc(&self.ones, &[j], &mut jpat[..l]);
            for i in 0..l {
                buf[i] = data.get(base + i).copied().unwrap_or(0) ^ jpat[i];
            }
            zero_fields_to_flags(&mut buf[..l], &self.test, f, &mut scratch[..l]);
        }
        let first = q * self.per;
        let from = lo.saturating_sub(first).min(self.per);
        let to = hi.saturating_sub(first).min(self.per);
        mw::mask(&mut buf[..l], to * f);
        if from > 0 {
            let mut low = [0u64; 64];
            low[..l].copy_from_slice(&buf[..l]);
            mw::mask(&mut low[..l], from * f);
            for i in 0..l {
                buf[i] ^= low[i];
            }
        }
    }

    /// Smallest field index in `[lo, hi)` whose value is `j`.
    pub fn next_eq(&self, data: &[u64], lo: usize, hi: usize, j: u64) -> Option<usize> {
        if lo >= hi {
            return None;
        }
        let mut buf = [0u64; 64];
        let mut scratch = [0u64; 64];
        for q in lo / self.per..=(hi - 1) / self.per {
            self.chunk_flags(data, q, j, lo, hi, &mut buf, &mut scratch);
            crate::space::probe::touch(self.limbs as u64);
            if let Some(i) = buf[..self.limbs].iter().position(|&w| w != 0) {
                let bit = floor_log_u64(lowest_one(buf[i])).unwrap() as usize + 64 * i;
                return Some(q * self.per + bit / self.f);
            }
        }
        None
    }

    /// Largest field index in `[lo, hi)` whose value is `j`.
    pub fn prev_eq(&self, data: &[u64], lo: usize, hi: usize, j: u64) -> Option<usize> {
        if lo >= hi {
            return None;
        }
        let mut buf = [0u64; 64];
        let mut scratch = [0u64; 64];
        for q in (lo / self.per..=(hi - 1) / self.per).rev() {
            self.chunk_flags(data, q, j, lo, hi, &mut buf, &mut scratch);
            crate::space::probe::touch(self.limbs as u64);
            if let Some(i) = (0..self.limbs).rev().find(|&i| buf[i] != 0) {
                let bit = floor_log_u64(buf[i]).unwrap() as usize + 64 * i;
                return Some(q * self.per + bit / self.f);
            }
        }
        None
    }

    /// Number of fields in `[lo, hi)` equal to `j`.
    pub fn count_eq(&self, data: &[u64], lo: usize, hi: usize, j: u64) -> usize {
        if lo >= hi {
            return 0;
        }
        let mut buf = [0u64; 64];
        let mut scratch = [0u64; 64];
        let mut total = 0;
        for q in lo / self.per..=(hi - 1) / self.per {
            self.chunk_flags(data, q, j, lo, hi, &mut buf, &mut scratch);
            total += buf[..self.limbs].iter().map(|w| w.count_ones() as usize).sum::<usize>();
        }
        total
    }
}

#[derive(Clone, Debug)]
pub struct AtomicChoiceDict {
    n: usize,
    c: usize,
    f: usize,
    data: Vec<u64>,
    counts: Vec<usize>,
    scanner: Option<FieldScanner>,
    iter: SuccessorIter,
}

impl AtomicChoiceDict {
    /// Clears `n ceil(log2 c)` bits eagerly.
    pub fn new(n: usize, c: usize) -> Self {
        assert!(c >= 1, "need at least one color");
        let f = ceil_log2(c as u64) as usize;
        let mut counts = vec![0; c];
        counts[0] = n;
        AtomicChoiceDict {
            n,
            c,
            f,
            data: vec![0; (n * f).div_ceil(64)],
            counts,
            scanner: (f > 0).then(|| FieldScanner::new(f)),
            iter: SuccessorIter::new(c),
        }
    }

    pub fn field_width(&self) -> usize {
        self.f
    }

    pub fn raw(&self) -> &[u64] {
        &self.data
    }

    fn check_l(&self, l: usize) -> Result<()> {
        crate::check_range("element", l as u64, 1, self.n as u64)
    }

    fn check_j(&self, j: usize) -> Result<()> {
        crate::check_range("color", j as u64, 0, self.c as u64 - 1)
    }

    /// Successor or predecessor within `S_j`.
    pub fn neighbor(&self, j: usize, l: usize, forward: bool) -> Result<usize> {
        self.check_j(j)?;
        if forward {
            self.successor(j, l)
        } else {
            self.predecessor(j, l)
        }
    }

    fn get(&self, l: usize) -> usize {
        mw::get_bits(&self.data, (l - 1) * self.f, self.f) as usize
    }
}

impl ColorDict for AtomicChoiceDict {
    fn universe(&self) -> usize {
        self.n
    }
    fn num_colors(&self) -> usize {
        self.c
    }
    fn color(&self, l: usize) -> Result<usize> {
        self.check_l(l)?;
        Ok(self.get(l))
    }
    fn setcolor(&mut self, j: usize, l: usize) -> Result<()> {
        self.check_j(j)?;
        self.check_l(l)?;
        let old = self.get(l);
        if old != j {
            mw::set_bits(&mut self.data, (l - 1) * self.f, self.f, j as u64);
            self.counts[old] -= 1;
            self.counts[j] += 1;
        }
        Ok(())
    }
    fn choice(&self, j: usize) -> Result<usize> {
        self.successor(j, 0)
    }
    fn size(&self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        Ok(self.counts[j])
    }
}

impl Successor for AtomicChoiceDict {
    fn successor(&self, j: usize, l: usize) -> Result<usize> {
        self.check_j(j)?;
        crate::check_range("element", l as u64, 0, self.n as u64)?;
        Ok(match &self.scanner {
            None => {
                if l < self.n {
                    l + 1
                } else {
                    0
                }
            }
            Some(s) => s.next_eq(&self.data, l, self.n, j as u64).map_or(0, |i| i + 1),
        })
    }
    fn predecessor(&self, j: usize, l: usize) -> Result<usize> {
        self.check_j(j)?;
        crate::check_range("element", l as u64, 1, self.n as u64 + 1)?;
        Ok(match &self.scanner {
            None => l - 1,
            Some(s) => s.prev_eq(&self.data, 0, l - 1, j as u64).map_or(0, |i| i + 1),
        })
    }
}

impl Iterable for AtomicChoiceDict {
    fn iter_init(&mut self, j: usize) -> Result<()> {
        self.check_j(j)?;
        self.iter.init(j);
        Ok(())
    }
    fn iter_more(&mut self, j: usize) -> Result<bool> {
        self.check_j(j)?;
        self.iter.more(self, j)
    }
    fn iter_next(&mut self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        let mut it = std::mem::replace(&mut self.iter, SuccessorIter::new(0));
        let r = it.next(self, j);
        self.iter = it;
        r
    }
}

impl SpaceUsage for AtomicChoiceDict {
    fn bits_used(&self) -> u64 {
        let counters = self.c as u64 * bits_for(self.n as u64) as u64;
        crate::space::word_bits(self.data.len() as u64 * 64)
            + crate::space::word_bits(counters)
            + self.iter.state_bits(self.n).div_ceil(64) * 64
            + 64
    }
}
