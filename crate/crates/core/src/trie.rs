//! Tries of small choice dictionaries.
//!
//! The universe is cut into blocks (the nodes of height 1) and the blocks
//! are the leaves of a tree whose node degrees are `p_1, p_2, ...` from the
//! bottom up. Nodes are addressed arithmetically, so the tree itself costs
//! nothing. Each internal node keeps, per child, a summary bit telling
//! whether the child's subtree holds a target element; the two levels above
//! the blocks keep these bits packed and scan them word-wise, higher levels
//! use a [`DenseChoiceDict`] per node.
//!
//! [`SystematicChoiceDict`] keeps the client set's bit vector as the blocks
//! and maintains two summary trees, one for the set and one for its
//! complement. [`MultiColorTrie`] has packed color fields as blocks and one
//! summary tree per color, all created lazily.
//!
//! Summaries are stored with a polarity: a summary for target `tau = 1`
//! stores the OR of its leaves, one for `tau = 0` stores the AND. A
//! zero-filled allocation is then consistent with an all-zero client
//! vector on both sides.

use crate::atomic::FieldScanner;
use crate::bits::{garbage_words, BitVec};
use crate::dense::DenseChoiceDict;
use crate::space::{probe, word_bits, SpaceUsage};
use crate::traits::{ColorDict, Iterable};
use crate::wordops::mw;
use crate::{ceil_log2, Error, Result};

/// Smallest `q >= 1` with `q^t >= n`.
pub fn int_root_ceil(n: usize, t: u32) -> usize {
    if n <= 1 || t == 0 {
        return 1;
    }
    if t == 1 {
        return n;
    }
    let pow_ge = |q: usize| {
        let mut acc: u128 = 1;
        for _ in 0..t {
            acc *= q as u128;
            if acc >= n as u128 {
                return true;
            }
        }
        false
    };
    let mut guess = (n as f64).powf(1.0 / t as f64).round() as usize;
    guess = guess.max(1);
    while guess > 1 && pow_ge(guess - 1) {
        guess -= 1;
    }
    while !pow_ge(guess) {
        guess += 1;
    }
    guess
}

/// Degrees and derived products of a trie over `{1, ..., n}`.
#[derive(Clone, Debug)]
pub struct TrieShape {
    n: usize,
    // p[j] for 1 <= j <= h; p[0] = 1.
    p: Vec<usize>,
    // P_j = p_1 * ... * p_j.
    big: Vec<usize>,
    h: usize,
    // Bits of node data at heights 1..=3, per summary tree.
    field: usize,
}

/// A node of height `j` and left index `k`, with `P_j` and the bit offset of
/// its level in the packed part of the memory image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeRef {
    pub j: usize,
    pub k: usize,
    pub pj: usize,
    pub fj: u64,
}

impl TrieShape {
    /// Degrees `prefix[0], prefix[1], ...` followed by `q` repeated until
    /// the product reaches `n`. `field` is the width of a block element.
    pub fn new(n: usize, prefix: &[usize], q: usize, field: usize) -> Self {
        assert!(n >= 1, "universe must be nonempty");
        let mut p = vec![1usize];
        let mut big = vec![1usize];
        let mut j = 0;
        while j == 0 || big[j] < n {
            let d = prefix.get(j).copied().unwrap_or(q).max(2);
            p.push(d);
            big.push(big[j].saturating_mul(d));
            j += 1;
        }
        TrieShape { n, p, big, h: j, field }
    }

    /// Degrees `k, k, 2 ceil(log2 n), q, q, ...` with `k = 128 t` and `q` the
    /// smallest integer with `q^t >= n`.
    pub fn systematic(n: usize, t: u32) -> Self {
        let t = t.max(1);
        let k = 128 * t as usize;
        let p3 = 2 * (ceil_log2(n as u64) as usize).max(1);
        TrieShape::new(n, &[k, k, p3], int_root_ceil(n, t), 1)
    }

    pub fn universe(&self) -> usize {
        self.n
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn degree_at(&self, j: usize) -> usize {
        self.p[j]
    }

    pub fn product(&self, j: usize) -> usize {
        self.big[j]
    }

    /// Number of nodes of height `j`.
    #[inline]
    pub fn count(&self, j: usize) -> usize {
        self.n.div_ceil(self.big[j])
    }

    /// Number of children of node `(j, k)`; smaller only for the rightmost.
    #[inline]
    pub fn degree(&self, j: usize, k: usize) -> usize {
        self.p[j].min(self.count(j - 1) - (k - 1) * self.p[j])
    }

    /// Child positions of `(j, k)` as a 0-based range at height `j - 1`.
    #[inline]
    fn children(&self, j: usize, k: usize) -> (usize, usize) {
        let lo = (k - 1) * self.p[j];
        (lo, (lo + self.p[j]).min(self.count(j - 1)))
    }

    /// Offset of level `j`'s data when heights 1 to 3 are laid out one
    /// after another; dense nodes above live apart.
    pub fn level_offset(&self, j: usize) -> u64 {
        let mut f = 0u64;
        for i in 1..=j.min(3).min(self.h) {
            let per = if i == 1 { self.p[1] * self.field } else { self.p[i] };
            f += (per * self.count(i)) as u64;
        }
        f
    }

    pub fn node(&self, j: usize, k: usize) -> Result<NodeRef> {
        crate::check_range("height", j as u64, 1, self.h as u64)?;
        crate::check_range("node", k as u64, 1, self.count(j) as u64)?;
        Ok(NodeRef { j, k, pj: self.big[j], fj: self.level_offset(j - 1) })
    }

    pub fn root(&self) -> NodeRef {
        self.node(self.h, 1).unwrap()
    }

    pub fn parent(&self, u: NodeRef) -> Option<NodeRef> {
        if u.j >= self.h {
            None
        } else {
            self.node(u.j + 1, (u.k - 1) / self.p[u.j + 1] + 1).ok()
        }
    }

    /// The `i`-th child of `u`, 1-based; the leaves are at height 0.
    pub fn child(&self, u: NodeRef, i: usize) -> Result<NodeRef> {
        if u.j == 0 {
            return Err(Error::Precondition("a leaf has no children"));
        }
        crate::check_range("child", i as u64, 1, self.degree(u.j, u.k) as u64)?;
        let k = (u.k - 1) * self.p[u.j] + i;
        if u.j == 1 {
            return Ok(NodeRef { j: 0, k, pj: 1, fj: 0 });
        }
        self.node(u.j - 1, k)
    }

    /// Index of the child of `u` whose subtree contains leaf `l`.
    pub fn viachild(&self, u: NodeRef, l: usize) -> Result<usize> {
        let first = (u.k - 1) * u.pj + 1;
        if l < first || l > (first - 1 + u.pj).min(self.n) || u.j == 0 {
            return Err(Error::OutOfRange { what: "leaf", value: l as u64 });
        }
        Ok(self.via(u.j, u.k, l))
    }

    #[inline]
    fn via(&self, j: usize, k: usize, l: usize) -> usize {
        (l - (k - 1) * self.big[j] - 1) / self.big[j - 1] + 1
    }

    #[inline]
    fn ancestor(&self, j: usize, l: usize) -> usize {
        (l - 1) / self.big[j] + 1
    }
}

/// Access to the block contents beneath a summary tree.
pub(crate) trait Blocks {
    /// Smallest 0-based element position in `[lo, hi)` holding value `v`;
    /// the range lies within one block.
    fn next_eq(&self, lo: usize, hi: usize, v: u64) -> Option<usize>;
}

struct PackedBlocks<'a> {
    words: &'a [u64],
    scan: &'a FieldScanner,
}

impl Blocks for PackedBlocks<'_> {
    #[inline]
    fn next_eq(&self, lo: usize, hi: usize, v: u64) -> Option<usize> {
        self.scan.next_eq(self.words, lo, hi, v)
    }
}

/// Blocks that read as all zero until first written.
struct TrackedBlocks<'a> {
    words: &'a [u64],
    scan: &'a FieldScanner,
    init: &'a SystematicChoiceDict,
    block: usize,
}

impl Blocks for TrackedBlocks<'_> {
    #[inline]
    fn next_eq(&self, lo: usize, hi: usize, v: u64) -> Option<usize> {
        if lo >= hi {
            None
        } else if !self.init.leaf(lo / self.block + 1) {
            (v == 0).then_some(lo)
        } else {
            self.scan.next_eq(self.words, lo, hi, v)
        }
    }
}

/// One summary tree: per-child flags for every internal node, plus the
/// state of one running iteration.
#[derive(Clone, Debug)]
struct Summary {
    // Block value being summarized.
    color: u64,
    // Flag value meaning "holds a target element".
    tau: bool,
    // Flags of the nodes of heights 1 and 2, one bit each.
    low: Vec<BitVec>,
    // Nodes of height 4 and above, indexed [j - 4][k - 1].
    dense: Vec<Vec<DenseChoiceDict>>,
    // Last element returned by the running iteration, 0 before the first.
    cursor: usize,
}

impl Summary {
    fn new(shape: &TrieShape, color: u64, tau: bool) -> Self {
        let h = shape.h;
        let low = (2..=h.min(3)).map(|j| BitVec::new(shape.count(j - 1))).collect();
        let dense = (4..=h)
            .map(|j| (1..=shape.count(j)).map(|k| DenseChoiceDict::new(shape.degree(j, k), 2)).collect())
            .collect();
        Summary { color, tau, low, dense, cursor: 0 }
    }

    #[inline]
    fn tau_u(&self) -> u64 {
        self.tau as u64
    }

    /// Flag of node `(j, k)`, `j < h`.
    #[inline]
    fn flag(&self, shape: &TrieShape, j: usize, k: usize) -> bool {
        let jp = j + 1;
        if jp <= 3 {
            probe::touch(1);
            self.low[jp - 2].get(k - 1)
        } else {
            let kp = (k - 1) / shape.p[jp] + 1;
            probe::touch(1);
            self.dense[jp - 4][kp - 1].color_unchecked(k - (kp - 1) * shape.p[jp]) == 1
        }
    }

    #[inline]
    fn set_flag(&mut self, shape: &TrieShape, j: usize, k: usize, b: bool) {
        let jp = j + 1;
        if jp <= 3 {
            probe::touch(1);
            self.low[jp - 2].set(k - 1, b);
        } else {
            let kp = (k - 1) / shape.p[jp] + 1;
            probe::touch(1);
            self.dense[jp - 4][kp - 1].setcolor_unchecked(b as usize, k - (kp - 1) * shape.p[jp]);
        }
    }

    /// First child of `(j, k)` at position `> pos` holding a target, for
    /// the packed levels.
    #[inline]
    fn scan_from<B: Blocks>(&self, shape: &TrieShape, blocks: &B, bits: &FieldScanner, j: usize, k: usize, pos: usize) -> Option<usize> {
        let (lo, hi) = shape.children(j, k);
        let hit = if j == 1 {
            blocks.next_eq(lo + pos, hi, self.color)
        } else {
            bits.next_eq(self.low[j - 2].words(), lo + pos, hi, self.tau_u())
        };
        hit.map(|x| x - lo + 1)
    }

    fn holds<B: Blocks>(&self, shape: &TrieShape, blocks: &B, bits: &FieldScanner, j: usize, k: usize) -> bool {
        if j <= 3 {
            self.scan_from(shape, blocks, bits, j, k, 0).is_some()
        } else {
            probe::touch(1);
            self.dense[j - 4][k - 1].size_unchecked(self.tau as usize) > 0
        }
    }

    /// Propagates a change of element `l`'s block value upwards; `now` is
    /// whether the new value is the target.
    fn refresh<B: Blocks>(&mut self, shape: &TrieShape, blocks: &B, bits: &FieldScanner, l: usize, now: bool) {
        let mut j = 1;
        let mut k = shape.ancestor(1, l);
        let mut has = now;
        while j < shape.h {
            if !has {
                has = self.holds(shape, blocks, bits, j, k);
            }
            let stored = has == self.tau;
            if self.flag(shape, j, k) == stored {
                break;
            }
            self.set_flag(shape, j, k, stored);
            j += 1;
            k = (k - 1) / shape.p[j] + 1;
        }
    }

    fn choice<B: Blocks>(&self, shape: &TrieShape, blocks: &B, bits: &FieldScanner) -> usize {
        let (mut j, mut k) = (shape.h, 1);
        if !self.holds(shape, blocks, bits, j, k) {
            return 0;
        }
        while j >= 1 {
            let i = if j <= 3 {
                self.scan_from(shape, blocks, bits, j, k, 0).expect("summary out of sync")
            } else {
                probe::touch(1);
                self.dense[j - 4][k - 1].p_select_unchecked(self.tau as usize, 1)
            };
            k = (k - 1) * shape.p[j] + i;
            j -= 1;
        }
        k
    }

    #[inline]
    fn node_more<B: Blocks>(&self, shape: &TrieShape, blocks: &B, bits: &FieldScanner, j: usize, k: usize, pos: usize) -> bool {
        if j <= 3 {
            self.scan_from(shape, blocks, bits, j, k, pos).is_some()
        } else {
            probe::touch(1);
            self.dense[j - 4][k - 1].iter_more_unchecked(self.tau as usize)
        }
    }

    fn iter_init(&mut self, shape: &TrieShape) {
        self.cursor = 0;
        if shape.h >= 4 {
            self.dense[shape.h - 4][0].iter_init_unchecked(self.tau as usize);
        }
    }

    fn iter_more<B: Blocks>(&self, shape: &TrieShape, blocks: &B, bits: &FieldScanner) -> bool {
        let l = self.cursor;
        if l == 0 {
            return self.node_more(shape, blocks, bits, shape.h, 1, 0);
        }
        (1..=shape.h).any(|j| {
            let k = shape.ancestor(j, l);
            self.node_more(shape, blocks, bits, j, k, shape.via(j, k, l))
        })
    }

    fn iter_next<B: Blocks>(&mut self, shape: &TrieShape, blocks: &B, bits: &FieldScanner) -> usize {
        let l = self.cursor;
        let (mut j, mut k, mut pos) = (shape.h, 1, 0);
        if l > 0 {
            // Lowest node on the active path with children left.
            let found = (1..=shape.h).find_map(|j| {
                let k = shape.ancestor(j, l);
                let pos = shape.via(j, k, l);
                self.node_more(shape, blocks, bits, j, k, pos).then_some((j, k, pos))
            });
            match found {
                Some(f) => (j, k, pos) = f,
                None => return 0,
            }
        } else if !self.node_more(shape, blocks, bits, j, k, 0) {
            return 0;
        }
        loop {
            let i = if j <= 3 {
                self.scan_from(shape, blocks, bits, j, k, pos).expect("summary out of sync")
            } else {
                probe::touch(1);
                self.dense[j - 4][k - 1].iter_next_unchecked(self.tau as usize)
            };
            k = (k - 1) * shape.p[j] + i;
            j -= 1;
            if j == 0 {
                self.cursor = k;
                return k;
            }
            if j >= 4 {
                self.dense[j - 4][k - 1].iter_init_unchecked(self.tau as usize);
            }
            pos = 0;
        }
    }
}

impl SpaceUsage for Summary {
    fn bits_used(&self) -> u64 {
        let low: u64 = self.low.iter().map(|b| b.bits_used()).sum();
        let dense: u64 = self.dense.iter().flatten().map(|d| d.bits_used()).sum();
        low + dense + 64
    }
}

/// Which side of a [`SystematicChoiceDict`] an operation addresses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Set,
    Complement,
}

impl Side {
    fn index(self) -> usize {
        match self {
            Side::Complement => 0,
            Side::Set => 1,
        }
    }
}

/// A subset of `{1, ..., n}` stored as a plain bit vector followed by two
/// summary trees, giving choice and robust iteration on both the set and
/// its complement in time `O(t)` with `n + O(n/t)`-bit overhead.
///
/// With `t = 1` the degrees above the blocks grow to `n`, which gives the
/// simple two-level dictionary with `O(n / log n)` redundancy.
#[derive(Clone, Debug)]
pub struct SystematicChoiceDict {
    leaves: BitVec,
    shape: TrieShape,
    // [complement, set]
    sides: [Summary; 2],
    size: usize,
    bits: FieldScanner,
}

impl SystematicChoiceDict {
    pub fn new(n: usize, t: u32) -> Self {
        Self::with_shape(TrieShape::systematic(n, t))
    }

    pub fn with_shape(shape: TrieShape) -> Self {
        let sides = [Summary::new(&shape, 0, false), Summary::new(&shape, 1, true)];
        SystematicChoiceDict { leaves: BitVec::new(shape.n), shape, sides, size: 0, bits: FieldScanner::new(1) }
    }

    pub fn shape(&self) -> &TrieShape {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Start of the memory image: bit `l - 1` is set iff `l` is a member.
    pub fn memory_prefix(&self) -> &[u64] {
        self.leaves.words()
    }

    fn check(&self, l: usize) -> Result<()> {
        crate::check_range("element", l as u64, 1, self.shape.n as u64)
    }

    #[inline]
    pub(crate) fn leaf(&self, l: usize) -> bool {
        probe::touch(1);
        self.leaves.get(l - 1)
    }

    pub fn contains(&self, l: usize) -> Result<bool> {
        self.check(l)?;
        Ok(self.leaf(l))
    }

    pub fn insert(&mut self, l: usize) -> Result<()> {
        self.check(l)?;
        self.put(l, true);
        Ok(())
    }

    pub fn delete(&mut self, l: usize) -> Result<()> {
        self.check(l)?;
        self.put(l, false);
        Ok(())
    }

    pub(crate) fn put(&mut self, l: usize, b: bool) {
        if self.leaf(l) == b {
            return;
        }
        self.leaves.set(l - 1, b);
        if b {
            self.size += 1;
        } else {
            self.size -= 1;
        }
        let blocks = PackedBlocks { words: self.leaves.words(), scan: &self.bits };
        let [comp, set] = &mut self.sides;
        set.refresh(&self.shape, &blocks, &self.bits, l, b);
        comp.refresh(&self.shape, &blocks, &self.bits, l, !b);
    }

    /// Some member of the chosen side, or 0.
    pub fn choice_side(&self, side: Side) -> usize {
        let blocks = PackedBlocks { words: self.leaves.words(), scan: &self.bits };
        self.sides[side.index()].choice(&self.shape, &blocks, &self.bits)
    }

    pub fn iter_init_side(&mut self, side: Side) {
        self.sides[side.index()].iter_init(&self.shape);
    }

    pub fn iter_more_side(&self, side: Side) -> bool {
        let blocks = PackedBlocks { words: self.leaves.words(), scan: &self.bits };
        self.sides[side.index()].iter_more(&self.shape, &blocks, &self.bits)
    }

    pub fn iter_next_side(&mut self, side: Side) -> usize {
        let blocks = PackedBlocks { words: self.leaves.words(), scan: &self.bits };
        self.sides[side.index()].iter_next(&self.shape, &blocks, &self.bits)
    }

    fn side_of(j: usize) -> Result<Side> {
        match j {
            0 => Ok(Side::Complement),
            1 => Ok(Side::Set),
            _ => Err(Error::OutOfRange { what: "color", value: j as u64 }),
        }
    }
}

impl ColorDict for SystematicChoiceDict {
    fn universe(&self) -> usize {
        self.shape.n
    }
    fn num_colors(&self) -> usize {
        2
    }
    fn color(&self, l: usize) -> Result<usize> {
        Ok(self.contains(l)? as usize)
    }
    fn setcolor(&mut self, j: usize, l: usize) -> Result<()> {
        let side = Self::side_of(j)?;
        self.check(l)?;
        self.put(l, side == Side::Set);
        Ok(())
    }
    fn choice(&self, j: usize) -> Result<usize> {
        Ok(self.choice_side(Self::side_of(j)?))
    }
    fn size(&self, j: usize) -> Result<usize> {
        Ok(match Self::side_of(j)? {
            Side::Set => self.size,
            Side::Complement => self.shape.n - self.size,
        })
    }
}

impl Iterable for SystematicChoiceDict {
    fn iter_init(&mut self, j: usize) -> Result<()> {
        self.iter_init_side(Self::side_of(j)?);
        Ok(())
    }
    fn iter_more(&mut self, j: usize) -> Result<bool> {
        Ok(self.iter_more_side(Self::side_of(j)?))
    }
    fn iter_next(&mut self, j: usize) -> Result<usize> {
        Ok(self.iter_next_side(Self::side_of(j)?))
    }
}

impl SpaceUsage for SystematicChoiceDict {
    fn bits_used(&self) -> u64 {
        // n, size and the degrees with their products.
        let header = 64 * (2 + 2 * (self.shape.h as u64 + 1));
        self.leaves.bits_used() + self.sides.iter().map(|s| s.bits_used()).sum::<u64>() + header
    }
}

/// Per-color summary trees over color fields kept by another structure,
/// which exposes them through [`Blocks`] in blocks of `64 t` elements.
/// A tree is set up the first time its color is involved in a change.
#[derive(Clone, Debug)]
pub(crate) struct Planted {
    shape: TrieShape,
    uppers: Vec<Option<Summary>>,
    bits: FieldScanner,
}

impl Planted {
    pub(crate) fn new(n: usize, c: usize, t: u32, f: usize) -> Self {
        let t = t.max(1);
        let block = 64 * t as usize;
        let m = n.div_ceil(block).max(1);
        let k = 128 * t as usize;
        let p3 = 2 * (ceil_log2(m as u64) as usize).max(1);
        let shape = TrieShape::new(n, &[block, k, k, p3], int_root_ceil(m, t), f);
        Planted { shape, uppers: vec![None; c], bits: FieldScanner::new(1) }
    }

    fn ensure(&mut self, j: usize) -> &mut Summary {
        let shape = &self.shape;
        self.uppers[j].get_or_insert_with(|| Summary::new(shape, j as u64, j != 0))
    }

    /// To be called right after `l` changed from `old` to `new`, the only
    /// change since the previous call.
    pub(crate) fn recolor<B: Blocks>(&mut self, blocks: &B, l: usize, old: usize, new: usize) {
        self.ensure(old);
        self.ensure(new);
        let (shape, bits) = (&self.shape, &self.bits);
        self.uppers[old].as_mut().unwrap().refresh(shape, blocks, bits, l, false);
        self.uppers[new].as_mut().unwrap().refresh(shape, blocks, bits, l, true);
    }

    pub(crate) fn iter_init(&mut self, j: usize) {
        self.ensure(j);
        let shape = &self.shape;
        self.uppers[j].as_mut().unwrap().iter_init(shape);
    }

    pub(crate) fn iter_more<B: Blocks>(&self, blocks: &B, j: usize) -> Result<bool> {
        let s = self.uppers[j].as_ref().ok_or(Error::Precondition("iteration not started"))?;
        Ok(s.iter_more(&self.shape, blocks, &self.bits))
    }

    pub(crate) fn iter_next<B: Blocks>(&mut self, blocks: &B, j: usize) -> Result<usize> {
        let s = self.uppers[j].as_mut().ok_or(Error::Precondition("iteration not started"))?;
        Ok(s.iter_next(&self.shape, blocks, &self.bits))
    }
}

impl SpaceUsage for Planted {
    fn bits_used(&self) -> u64 {
        let uppers: u64 = self.uppers.iter().flatten().map(|s| s.bits_used()).sum();
        uppers + 64 * (self.uppers.len() as u64 + 2 * (self.shape.h as u64 + 1))
    }
}

/// A `c`-color dictionary: packed color fields grouped into lower trees of
/// `64 t` elements, under one summary tree per color. Lower trees and
/// summary trees are set up on first use; a small systematic dictionary
/// records which ones exist.
#[derive(Clone, Debug)]
pub struct MultiColorTrie {
    n: usize,
    c: usize,
    f: usize,
    block: usize,
    data: Vec<u64>,
    shape: TrieShape,
    uppers: Vec<Option<Summary>>,
    // Lower tree i is live iff i is a member; upper tree j iff m + 1 + j is.
    live: SystematicChoiceDict,
    sizes: Vec<usize>,
    scan: FieldScanner,
    bits: FieldScanner,
}

impl MultiColorTrie {
    pub fn new(n: usize, c: usize, t: u32) -> Self {
        Self::build(n, c, t, None)
    }

    /// Same as [`new`](Self::new) but the color fields start with arbitrary
    /// bits.
    pub fn with_garbage(n: usize, c: usize, t: u32, seed: u64) -> Self {
        Self::build(n, c, t, Some(seed))
    }

    fn build(n: usize, c: usize, t: u32, seed: Option<u64>) -> Self {
        assert!(c >= 1, "need at least one color");
        let t = t.max(1);
        let f = (ceil_log2(c as u64) as usize).max(1);
        let block = 64 * t as usize;
        let m = n.div_ceil(block).max(1);
        let k = 128 * t as usize;
        let p3 = 2 * (ceil_log2(m as u64) as usize).max(1);
        let shape = TrieShape::new(n, &[block, k, k, p3], int_root_ceil(m, t), f);
        let words = (n * f).div_ceil(64);
        let data = match seed {
            Some(s) => garbage_words(words, s),
            None => vec![0; words],
        };
        MultiColorTrie {
            n,
            c,
            f,
            block,
            data,
            shape,
            uppers: vec![None; c],
            live: SystematicChoiceDict::new(m + c, 1),
            sizes: vec![0; c],
            scan: FieldScanner::new(f),
            bits: FieldScanner::new(1),
        }
    }

    fn lower_count(&self) -> usize {
        self.n.div_ceil(self.block).max(1)
    }

    fn check_l(&self, l: usize) -> Result<()> {
        crate::check_range("element", l as u64, 1, self.n as u64)
    }

    fn check_j(&self, j: usize) -> Result<()> {
        crate::check_range("color", j as u64, 0, self.c as u64 - 1)
    }

    fn color_unchecked(&self, l: usize) -> usize {
        if !self.live.leaf((l - 1) / self.block + 1) {
            return 0;
        }
        probe::touch(1);
        mw::get_bits(&self.data, (l - 1) * self.f, self.f) as usize
    }

    fn ensure_lower(&mut self, i: usize) {
        if self.live.leaf(i) {
            return;
        }
        let lo = (i - 1) * self.block * self.f;
        let hi = ((i * self.block).min(self.n)) * self.f;
        let mut pos = lo;
        while pos < hi {
            let len = (hi - pos).min(64);
            mw::set_bits(&mut self.data, pos, len, 0);
            pos += len;
        }
        self.live.put(i, true);
    }

    fn ensure_upper(&mut self, j: usize) {
        let id = self.lower_count() + 1 + j;
        if !self.live.leaf(id) {
            self.uppers[j] = Some(Summary::new(&self.shape, j as u64, j != 0));
            self.live.put(id, true);
        }
    }

    fn blocks(&self) -> TrackedBlocks<'_> {
        TrackedBlocks { words: &self.data, scan: &self.scan, init: &self.live, block: self.block }
    }
}

impl ColorDict for MultiColorTrie {
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
        self.check_l(l)?;
        self.check_j(j)?;
        let old = self.color_unchecked(l);
        if old == j {
            return Ok(());
        }
        self.ensure_lower((l - 1) / self.block + 1);
        self.ensure_upper(old);
        self.ensure_upper(j);
        mw::set_bits(&mut self.data, (l - 1) * self.f, self.f, j as u64);
        self.sizes[old] = self.sizes[old].wrapping_sub(1);
        self.sizes[j] = self.sizes[j].wrapping_add(1);
        let mut uppers = std::mem::take(&mut self.uppers);
        {
            let blocks = self.blocks();
            uppers[old].as_mut().unwrap().refresh(&self.shape, &blocks, &self.bits, l, false);
            uppers[j].as_mut().unwrap().refresh(&self.shape, &blocks, &self.bits, l, true);
        }
        self.uppers = uppers;
        Ok(())
    }
    fn choice(&self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        Ok(match &self.uppers[j] {
            Some(s) => s.choice(&self.shape, &self.blocks(), &self.bits),
            None => (j == 0 && self.n > 0) as usize,
        })
    }
    fn size(&self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        Ok(if j == 0 { self.n - self.sizes[1..].iter().sum::<usize>() } else { self.sizes[j] })
    }
}

impl Iterable for MultiColorTrie {
    fn iter_init(&mut self, j: usize) -> Result<()> {
        self.check_j(j)?;
        self.ensure_upper(j);
        self.uppers[j].as_mut().unwrap().iter_init(&self.shape);
        Ok(())
    }
    fn iter_more(&mut self, j: usize) -> Result<bool> {
        self.check_j(j)?;
        let s = self.uppers[j].as_ref().ok_or(Error::Precondition("iteration not started"))?;
        Ok(s.iter_more(&self.shape, &self.blocks(), &self.bits))
    }
    fn iter_next(&mut self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        let mut s = self.uppers[j].take().ok_or(Error::Precondition("iteration not started"))?;
        let r = s.iter_next(&self.shape, &self.blocks(), &self.bits);
        self.uppers[j] = Some(s);
        Ok(r)
    }
}

impl SpaceUsage for MultiColorTrie {
    fn bits_used(&self) -> u64 {
        let uppers: u64 = self.uppers.iter().flatten().map(|s| s.bits_used()).sum();
        word_bits(self.data.len() as u64 * 64)
            + uppers
            + self.live.bits_used()
            + 64 * (self.c as u64 + 4 + 2 * (self.shape.h as u64 + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn viachild_examples() {
        let s = TrieShape::new(16, &[4, 4], 4, 1);
        assert_eq!(s.height(), 2);
        let r = s.root();
        assert_eq!(s.viachild(r, 7).unwrap(), 2);
        assert_eq!(s.viachild(r, 1).unwrap(), 1);
        assert!(s.viachild(r, 17).is_err());
        let u = s.node(1, 3).unwrap();
        assert_eq!(s.viachild(u, 9).unwrap(), 1);
        assert!(s.viachild(u, 8).is_err());
    }

    #[test]
    fn navigation_reaches_every_leaf() {
        for (n, pre, q) in [(100usize, vec![3usize, 5], 2usize), (1, vec![], 2), (64, vec![64], 2), (1000, vec![7, 2, 3], 4)] {
            let s = TrieShape::new(n, &pre, q, 1);
            assert!(s.product(s.height()) >= n);
            assert!(s.height() == 1 || s.product(s.height() - 1) < n);
            for l in 1..=n {
                let mut u = s.root();
                while u.j > 0 {
                    let i = s.viachild(u, l).unwrap();
                    let v = s.child(u, i).unwrap();
                    if v.j > 0 {
                        assert_eq!(s.parent(v), Some(u));
                    }
                    u = v;
                }
                assert_eq!(u.k, l);
            }
            let offs: Vec<u64> = (0..=s.height()).map(|j| s.level_offset(j)).collect();
            assert!(offs.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn int_root() {
        for n in 1..2000usize {
            for t in 1..5u32 {
                let q = int_root_ceil(n, t);
                assert!((q as u128).pow(t) >= n as u128);
                assert!(q == 1 || ((q - 1) as u128).pow(t) < n as u128);
            }
        }
    }

    fn check_prefix(d: &SystematicChoiceDict, oracle: &[bool]) {
        let w = d.memory_prefix();
        for l in 1..oracle.len() {
            assert_eq!(w[(l - 1) / 64] >> ((l - 1) % 64) & 1 == 1, oracle[l]);
        }
    }

    #[test]
    fn examples() {
        let mut d = SystematicChoiceDict::new(20, 2);
        assert!((1..=20).all(|l| !d.contains(l).unwrap()));
        assert_eq!(d.choice_side(Side::Set), 0);
        assert_ne!(d.choice_side(Side::Complement), 0);
        d.insert(5).unwrap();
        assert!(d.contains(5).unwrap());
        d.delete(5).unwrap();
        assert!(!d.contains(5).unwrap());
        d.insert(9).unwrap();
        assert_eq!(d.choice_side(Side::Set), 9);
        assert!(d.insert(21).is_err());
        assert!(d.contains(0).is_err());
        let mut e = SystematicChoiceDict::new(10, 1);
        for l in [2, 5, 7] {
            e.insert(l).unwrap();
        }
        let mut got = crate::traits::elements(&mut e, 1).unwrap();
        got.sort();
        assert_eq!(got, vec![2, 5, 7]);
        let all = crate::traits::elements(&mut SystematicChoiceDict::new(10, 1), 0).unwrap();
        assert_eq!(all.into_iter().collect::<BTreeSet<_>>(), (1..=10).collect());
    }

    /// Small degrees force tall trees, so that every kind of level is used.
    fn shapes(n: usize) -> Vec<TrieShape> {
        vec![TrieShape::systematic(n, 1), TrieShape::systematic(n, 3), TrieShape::new(n, &[2, 3, 2], 2, 1), TrieShape::new(n, &[4, 2, 2, 3], 3, 1)]
    }

    #[test]
    fn random_ops_match_bitset() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1usize, 2, 63, 64, 65, 300, 4096] {
            for shape in shapes(n) {
                let mut d = SystematicChoiceDict::with_shape(shape);
                let mut o = vec![false; n + 1];
                for step in 0..3000 {
                    let l = rng.gen_range(1..=n);
                    match rng.gen_range(0..5) {
                        0 | 1 => {
                            d.insert(l).unwrap();
                            o[l] = true;
                        }
                        2 | 3 => {
                            d.delete(l).unwrap();
                            o[l] = false;
                        }
                        _ => assert_eq!(d.contains(l).unwrap(), o[l]),
                    }
                    let members = o.iter().filter(|&&b| b).count();
                    assert_eq!(d.len(), members);
                    let s = d.choice_side(Side::Set);
                    assert_eq!(s == 0, members == 0);
                    if s != 0 {
                        assert!(o[s]);
                    }
                    let c = d.choice_side(Side::Complement);
                    assert_eq!(c == 0, members == n);
                    if c != 0 {
                        assert!(!o[c]);
                    }
                    if step % 97 == 0 {
                        check_prefix(&d, &o);
                    }
                }
            }
        }
    }

    /// Robust iteration with interleaved updates against the contract:
    /// elements present throughout appear exactly once, nothing is
    /// returned while absent.
    fn robust_run<D: Iterable>(d: &mut D, o: &mut [usize], j: usize, c: usize, rng: &mut ChaCha8Rng) {
        let n = o.len() - 1;
        let mut stable: Vec<bool> = (0..=n).map(|l| l > 0 && o[l] == j).collect();
        let mut seen = vec![false; n + 1];
        d.iter_init(j).unwrap();
        loop {
            for _ in 0..rng.gen_range(0..3) {
                let l = rng.gen_range(1..=n);
                let k = rng.gen_range(0..c);
                d.setcolor(k, l).unwrap();
                if k != j {
                    stable[l] = false;
                }
                o[l] = k;
            }
            let more = d.iter_more(j).unwrap();
            let x = d.iter_next(j).unwrap();
            assert_eq!(more, x != 0);
            if x == 0 {
                break;
            }
            assert_eq!(o[x], j);
            assert!(!seen[x], "returned twice: {x}");
            seen[x] = true;
        }
        for l in 1..=n {
            if stable[l] {
                assert!(seen[l], "missed {l}");
            }
        }
        assert_eq!(d.iter_next(j).unwrap(), 0);
    }

    #[test]
    fn robust_iteration_systematic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in [1usize, 5, 64, 65, 200, 1000] {
            for shape in shapes(n) {
                let mut d = SystematicChoiceDict::with_shape(shape);
                let mut o = vec![0usize; n + 1];
                for _ in 0..20 {
                    for _ in 0..n / 3 + 1 {
                        let l = rng.gen_range(1..=n);
                        let k = rng.gen_range(0..2);
                        d.setcolor(k, l).unwrap();
                        o[l] = k;
                    }
                    let j = rng.gen_range(0..2);
                    robust_run(&mut d, &mut o, j, 2, &mut rng);
                }
            }
        }
    }

    #[test]
    fn two_live_iterations() {
        let mut d = SystematicChoiceDict::new(300, 2);
        for l in (1..=300).step_by(3) {
            d.insert(l).unwrap();
        }
        d.iter_init_side(Side::Set);
        d.iter_init_side(Side::Complement);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        loop {
            let x = d.iter_next_side(Side::Set);
            let y = d.iter_next_side(Side::Complement);
            if x != 0 {
                a.push(x);
            }
            if y != 0 {
                b.push(y);
            }
            if x == 0 && y == 0 {
                break;
            }
        }
        assert_eq!(a.len(), 100);
        assert_eq!(b.len(), 200);
        assert!(a.iter().all(|&l| l % 3 == 1) && b.iter().all(|&l| l % 3 != 1));
    }

    #[test]
    fn multicolor_matches_array() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for c in [1usize, 2, 3, 4, 8] {
            for n in [1usize, 63, 64, 65, 1000] {
                for t in [1u32, 2] {
                    let mut d = MultiColorTrie::with_garbage(n, c, t, n as u64 + c as u64);
                    assert!((1..=n).all(|l| d.color(l).unwrap() == 0));
                    assert_ne!(d.choice(0).unwrap(), 0);
                    assert!((1..c).all(|j| d.choice(j).unwrap() == 0));
                    let mut o = vec![0usize; n + 1];
                    for _ in 0..4000 {
                        let l = rng.gen_range(1..=n);
                        let j = rng.gen_range(0..c);
                        d.setcolor(j, l).unwrap();
                        o[l] = j;
                        let q = rng.gen_range(1..=n);
                        assert_eq!(d.color(q).unwrap(), o[q]);
                        let k = rng.gen_range(0..c);
                        let x = d.choice(k).unwrap();
                        let cnt = o[1..].iter().filter(|&&v| v == k).count();
                        assert_eq!(d.size(k).unwrap(), cnt);
                        assert_eq!(x == 0, cnt == 0);
                        if x != 0 {
                            assert_eq!(o[x], k);
                        }
                    }
                    for _ in 0..5 {
                        let j = rng.gen_range(0..c);
                        robust_run(&mut d, &mut o, j, c, &mut rng);
                    }
                }
            }
        }
        let mut d = MultiColorTrie::new(50, 3, 1);
        d.setcolor(2, 17).unwrap();
        assert_eq!(d.choice(2).unwrap(), 17);
        assert!(d.setcolor(3, 1).is_err());
    }

    #[test]
    fn cost_is_bounded_per_level() {
        for t in [1u32, 2, 4] {
            let n = 1 << 16;
            let mut d = SystematicChoiceDict::new(n, t);
            let mut rng = ChaCha8Rng::seed_from_u64(t as u64);
            let h = d.shape().height() as u64;
            let limit = 4 * (2 * t as u64 + 2) + 16 * h;
            for _ in 0..2000 {
                let l = rng.gen_range(1..=n);
                probe::start();
                if rng.gen_bool(0.5) {
                    d.insert(l).unwrap();
                } else {
                    d.delete(l).unwrap();
                }
                let _ = d.choice_side(Side::Set);
                let _ = d.choice_side(Side::Complement);
                let words = probe::stop();
                assert!(words <= limit, "t={t}: {words} > {limit}");
            }
        }
    }

    #[test]
    fn space_bound() {
        let n = 1_000_000usize;
        for t in [1u32, 2, 4] {
            let d = SystematicChoiceDict::new(n, t);
            let k = 64.0 * t as f64;
            let bound = n as f64 + (n as f64 / k).ceil() + 10.0 * n as f64 / (k * k) + 64.0 * 20.0;
            assert!((d.bits_used() as f64) <= bound, "t={t}: {} > {bound}", d.bits_used());
        }
    }
}
