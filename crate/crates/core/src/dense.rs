//! A `c`-color choice dictionary in `O((n + c) log(n + c))` bits with
//! constant-time color, p-rank, p-select and robust iteration, and
//! `setcolor` in time proportional to the color distance.
//!
//! A permutation `pi` lists the universe sorted by *hue*: color `j` owns the
//! two consecutive segments of hues `2j` (still to be enumerated by a
//! running iteration) and `2j+1` (not to be enumerated). Only the segment
//! boundaries `s_k` are stored; sizes are differences of boundaries. An
//! element's color lives in a lazily initialized array; which of its two
//! hues it has follows from its position.

use crate::lazyinit::{DefaultRule, InitFreeArray};
use crate::rotperm::RotatablePermutation;
use crate::space::SpaceUsage;
use crate::traits::{ColorDict, Iterable, PRankSelect};
use crate::{bits_for, ceil_log2, Result};

#[derive(Clone, Debug)]
pub struct DenseChoiceDict {
    n: usize,
    c: usize,
    perm: RotatablePermutation,
    // s_0 .. s_{2c-1}; s_{-1} = 0 is implicit. Unwritten entries read n.
    bounds: InitFreeArray,
    // 2 * color + 1 for elements recolored at least once, 0 otherwise.
    hue: InitFreeArray,
    scratch: Vec<usize>,
}

impl DenseChoiceDict {
    pub fn new(n: usize, c: usize) -> Self {
        assert!(c >= 1, "need at least one color");
        let bw = bits_for(n as u64) as usize;
        let hw = ceil_log2(2 * c as u64) as usize;
        DenseChoiceDict {
            n,
            c,
            perm: RotatablePermutation::new(n),
            bounds: InitFreeArray::new(2 * c, bw, DefaultRule::Constant(n as u64)),
            hue: InitFreeArray::new(n, hw, DefaultRule::Constant(0)),
            scratch: Vec::new(),
        }
    }

    /// Same as [`new`](Self::new) but every array starts with arbitrary bits.
    pub fn with_garbage(n: usize, c: usize, seed: u64) -> Self {
        assert!(c >= 1, "need at least one color");
        let bw = bits_for(n as u64) as usize;
        let hw = ceil_log2(2 * c as u64) as usize;
        DenseChoiceDict {
            n,
            c,
            perm: RotatablePermutation::with_garbage(n, seed),
            bounds: InitFreeArray::with_garbage(2 * c, bw, DefaultRule::Constant(n as u64), seed ^ 1),
            hue: InitFreeArray::with_garbage(n, hw, DefaultRule::Constant(0), seed ^ 2),
            scratch: Vec::new(),
        }
    }

    /// `s_k` for `k >= -1`, passed as `k + 1`.
    #[inline]
    fn s(&self, k1: usize) -> usize {
        if k1 == 0 {
            0
        } else {
            self.bounds.read_unchecked(k1) as usize
        }
    }

    #[inline]
    fn set_s(&mut self, k1: usize, v: usize) {
        debug_assert!(k1 >= 1);
        self.bounds.write_unchecked(k1, v as u64);
    }

    /// `m_k = |R_k|`.
    pub fn segment_size(&self, k: usize) -> usize {
        self.s(k + 1) - self.s(k)
    }

    /// Trust threshold of the underlying permutation.
    pub fn mu(&self) -> usize {
        self.perm.mu()
    }

    fn check_l(&self, l: usize) -> Result<()> {
        crate::check_range("element", l as u64, 1, self.n as u64)
    }

    fn check_j(&self, j: usize) -> Result<()> {
        crate::check_range("color", j as u64, 0, self.c as u64 - 1)
    }

    #[inline]
    pub(crate) fn color_unchecked(&self, l: usize) -> usize {
        self.hue.read_unchecked(l) as usize / 2
    }

    /// Current hue of `l`, read off its position.
    fn hue_of(&self, l: usize) -> usize {
        let j = self.color_unchecked(l);
        let p = self.perm.inv(l);
        if p <= self.s(2 * j + 1) {
            2 * j
        } else {
            2 * j + 1
        }
    }

    /// Moves `l` from segment `a` to segment `b`.
    fn move_element(&mut self, l: usize, a: usize, b: usize) {
        let p = self.perm.inv(l);
        let mut js = std::mem::take(&mut self.scratch);
        js.clear();
        js.push(p);
        if a < b {
            for k in a..b {
                let v = self.s(k + 1);
                if !js.contains(&v) {
                    js.push(v);
                }
            }
            self.perm.rotate_unchecked(&js);
            for k in a..b {
                let v = self.s(k + 1);
                self.set_s(k + 1, v - 1);
            }
        } else {
            for k in (b..a).rev() {
                let v = self.s(k + 1) + 1;
                if !js.contains(&v) {
                    js.push(v);
                }
            }
            self.perm.rotate_unchecked(&js);
            for k in b..a {
                let v = self.s(k + 1);
                self.set_s(k + 1, v + 1);
            }
        }
        self.scratch = js;
    }

    pub(crate) fn setcolor_unchecked(&mut self, j: usize, l: usize) {
        if self.color_unchecked(l) == j {
            return;
        }
        self.perm.consolidate();
        let a = self.hue_of(l);
        self.move_element(l, a, 2 * j + 1);
        self.hue.write_unchecked(l, (2 * j + 1) as u64);
        debug_assert!(self.perm.mu() <= self.segment_size(0));
    }

    #[inline]
    pub(crate) fn size_unchecked(&self, j: usize) -> usize {
        self.s(2 * j + 2) - self.s(2 * j)
    }

    #[inline]
    pub(crate) fn p_select_unchecked(&self, j: usize, k: usize) -> usize {
        if k == 0 || k > self.size_unchecked(j) {
            0
        } else {
            self.perm.fwd(self.s(2 * j) + k)
        }
    }

    pub(crate) fn iter_init_unchecked(&mut self, j: usize) {
        let v = self.s(2 * j + 2);
        self.set_s(2 * j + 1, v);
    }

    #[inline]
    pub(crate) fn iter_more_unchecked(&self, j: usize) -> bool {
        self.segment_size(2 * j) > 0
    }

    pub(crate) fn iter_next_unchecked(&mut self, j: usize) -> usize {
        if !self.iter_more_unchecked(j) {
            return 0;
        }
        self.perm.consolidate();
        let v = self.s(2 * j + 1) - 1;
        self.set_s(2 * j + 1, v);
        debug_assert!(self.perm.mu() <= self.segment_size(0));
        self.perm.fwd(v + 1)
    }
}

impl ColorDict for DenseChoiceDict {
    fn universe(&self) -> usize {
        self.n
    }
    fn num_colors(&self) -> usize {
        self.c
    }
    fn color(&self, l: usize) -> Result<usize> {
        self.check_l(l)?;
        Ok(self.color_unchecked(l))
    }
    fn setcolor(&mut self, j: usize, l: usize) -> Result<()> {
        self.check_j(j)?;
        self.check_l(l)?;
        self.setcolor_unchecked(j, l);
        Ok(())
    }
    fn choice(&self, j: usize) -> Result<usize> {
        self.p_select(j, 1)
    }
    fn size(&self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        Ok(self.size_unchecked(j))
    }
}

impl PRankSelect for DenseChoiceDict {
    fn p_rank(&self, l: usize) -> Result<usize> {
        self.check_l(l)?;
        let j = self.color_unchecked(l);
        Ok(self.perm.inv(l) - self.s(2 * j))
    }
    fn p_select(&self, j: usize, k: usize) -> Result<usize> {
        self.check_j(j)?;
        Ok(self.p_select_unchecked(j, k))
    }
}

impl Iterable for DenseChoiceDict {
    fn iter_init(&mut self, j: usize) -> Result<()> {
        self.check_j(j)?;
        self.iter_init_unchecked(j);
        Ok(())
    }
    fn iter_more(&mut self, j: usize) -> Result<bool> {
        self.check_j(j)?;
        Ok(self.iter_more_unchecked(j))
    }
    fn iter_next(&mut self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        Ok(self.iter_next_unchecked(j))
    }
}

impl SpaceUsage for DenseChoiceDict {
    fn bits_used(&self) -> u64 {
        self.perm.bits_used() + self.bounds.bits_used() + self.hue.bits_used() + 2 * 64
    }
}
