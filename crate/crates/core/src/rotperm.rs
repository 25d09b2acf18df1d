//! A permutation of `{1, ..., n}` with its inverse, initialized to the
//! identity in constant time, that supports cyclic rotation of values.
//!
//! Values are trusted only on a suffix `{mu+1, ..., n}` that grows by one
//! with every `consolidate`; rotations are exact there and keep the whole
//! map a bijection.

use crate::bits::IntVec;
use crate::space::SpaceUsage;
use crate::{ceil_log2, Error, Result};

#[derive(Clone, Debug)]
pub struct RotatablePermutation {
    n: usize,
    mu: usize,
    // Entries store element - 1.
    p: IntVec,
    p_inv: IntVec,
}

impl RotatablePermutation {
    pub fn new(n: usize) -> Self {
        let w = ceil_log2(n as u64) as usize;
        Self::assemble(n, IntVec::new(n, w), IntVec::new(n, w))
    }

    /// Constructs over arrays holding arbitrary bits.
    pub fn with_garbage(n: usize, seed: u64) -> Self {
        let w = ceil_log2(n as u64) as usize;
        Self::assemble(n, IntVec::with_garbage(n, w, seed), IntVec::with_garbage(n, w, !seed))
    }

    fn assemble(n: usize, p: IntVec, p_inv: IntVec) -> Self {
        let mut r = RotatablePermutation { n, mu: n, p, p_inv };
        r.consolidate();
        r
    }

    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn mu(&self) -> usize {
        self.mu
    }

    #[inline]
    fn proper_in_p(&self, l: usize) -> Option<usize> {
        let v = self.p.get(l - 1) as usize;
        if v < self.n && self.p_inv.get(v) as usize == l - 1 && l.max(v + 1) > self.mu {
            Some(v + 1)
        } else {
            None
        }
    }

    #[inline]
    fn proper_in_pinv(&self, l: usize) -> Option<usize> {
        let v = self.p_inv.get(l - 1) as usize;
        if v < self.n && self.p.get(v) as usize == l - 1 && l.max(v + 1) > self.mu {
            Some(v + 1)
        } else {
            None
        }
    }

    /// `pi(l)`, or `pi^{-1}(l)` when `inverse`.
    pub fn evaluate(&self, l: usize, inverse: bool) -> Result<usize> {
        crate::check_range("element", l as u64, 1, self.n as u64)?;
        Ok(if inverse { self.inv(l) } else { self.fwd(l) })
    }

    #[inline]
    pub(crate) fn fwd(&self, l: usize) -> usize {
        self.proper_in_p(l).unwrap_or(l)
    }

    #[inline]
    pub(crate) fn inv(&self, l: usize) -> usize {
        self.proper_in_pinv(l).unwrap_or(l)
    }

    /// `mu := max(mu - 1, 0)`, pinning `mu` first if it is improper.
    pub fn consolidate(&mut self) {
        if self.mu == 0 {
            return;
        }
        let m = self.mu;
        if self.proper_in_p(m).is_none() {
            self.p.set(m - 1, (m - 1) as u64);
            self.p_inv.set(m - 1, (m - 1) as u64);
        }
        self.mu -= 1;
    }

    /// Replaces `pi` by a permutation agreeing on `{mu+1, ..., n}` with
    /// `pi'`, where `pi'(j_i) = pi(j_{i+1})`, `pi'(j_k) = pi(j_1)`.
    pub fn rotate(&mut self, js: &[usize]) -> Result<()> {
        for (i, &j) in js.iter().enumerate() {
            crate::check_range("element", j as u64, 1, self.n as u64)?;
            if js[..i].contains(&j) {
                return Err(Error::Precondition("rotate arguments must be distinct"));
            }
        }
        self.rotate_unchecked(js);
        Ok(())
    }

    pub(crate) fn rotate_unchecked(&mut self, js: &[usize]) {
        let k = js.len();
        if k <= 1 {
            return;
        }
        for &j in js {
            if self.proper_in_p(j).is_none() {
                self.p.set(j - 1, (j - 1) as u64);
            }
        }
        let first = self.p.get(js[0] - 1);
        for i in 0..k - 1 {
            let v = self.p.get(js[i + 1] - 1);
            self.p.set(js[i] - 1, v);
        }
        self.p.set(js[k - 1] - 1, first);
        for &j in js {
            let v = self.p.get(j - 1) as usize;
            self.p_inv.set(v, (j - 1) as u64);
        }
        let mu = self.mu;
        let mut a: Vec<usize> = Vec::new();
        let mut b: Vec<usize> = Vec::new();
        for &j in js {
            let v = self.p.get(j - 1) as usize + 1;
            if j <= mu && v <= mu {
                a.push(j);
                b.push(v);
            }
        }
        let mut a_only: Vec<usize> = a.iter().copied().filter(|x| !b.contains(x)).collect();
        if a_only.is_empty() {
            return;
        }
        let mut targets: Vec<usize> = b
            .iter()
            .copied()
            .filter(|x| !a.contains(x))
            .map(|x| if js.contains(&x) { self.p.get(x - 1) as usize + 1 } else { self.fwd(x) })
            .collect();
        a_only.sort_unstable();
        targets.sort_unstable();
        for (&x, &t) in a_only.iter().zip(&targets) {
            self.p.set(x - 1, (t - 1) as u64);
        }
        for &x in &a_only {
            let v = self.p.get(x - 1) as usize;
            self.p_inv.set(v, (x - 1) as u64);
        }
    }
}

impl SpaceUsage for RotatablePermutation {
    fn bits_used(&self) -> u64 {
        self.p.bits_used() + self.p_inv.bits_used() + 64
    }
}
