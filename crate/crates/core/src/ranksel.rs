//! p-rank, p-select and uniform choice in time `O(t)` over a color vector
//! stored in close to `n log2 c` bits.
//!
//! Colors are grouped `r'` per *big digit*. In memory a big digit is one
//! radix-`c^r'` digit of a [`CAryArray`] (or a plain bit field when `c` is
//! a power of two); while it is worked on it is unpacked into its *loose*
//! form, one `ceil(log2 c)`-bit field per color, where counting and
//! selecting a color are single-word operations.
//!
//! [`SegmentRankSelect`] answers rank and select by position inside one
//! segment: ranges of `t` big digits, and per color a prefix-sum structure
//! over the ranges' counts. [`ColorWeightIndex`] cuts the universe into
//! segments of `Theta(t log^2 n)` elements and groups the segments by their
//! number of elements of each color, so that selecting in a color class
//! becomes a search over the class sizes followed by a segment-local select.

use crate::bits::IntVec;
use crate::carray::CAryArray;
use crate::dense::DenseChoiceDict;
use crate::lazyinit::LazyAllocator;
use crate::prefixsums::SearchablePrefixSums;
use crate::space::{probe, word_bits, SpaceUsage};
use crate::traits::{ColorDict, Iterable, PRankSelect};
use crate::trie::{Blocks, Planted, SystematicChoiceDict};
use crate::{bits_for, ceil_log2, Error, Result};
use rand::Rng;

/// Segment exponent of the radix storage.
const RADIX_SEGMENT: u32 = 4;

/// Loose big digits are tabulated when they have at most this many bits.
const EAGER_BITS: usize = 20;

/// Field operations on one loose big digit of `r` fields of `f` bits.
#[derive(Clone, Debug)]
struct Loose {
    f: usize,
    r: usize,
    ones: u64,
    test: u64,
}

impl Loose {
    fn new(f: usize, r: usize) -> Self {
        debug_assert!(f * r <= 64);
        let ones = (0..r).fold(0u64, |a, i| a | 1 << (i * f));
        Loose { f, r, ones, test: ones << (f - 1) }
    }

    #[inline]
    fn field(&self, x: u64, i: usize) -> usize {
        ((x >> (i * self.f)) & ((1 << self.f) - 1)) as usize
    }

    #[inline]
    fn with_field(&self, x: u64, i: usize, j: usize) -> u64 {
        let mask = ((1u64 << self.f) - 1) << (i * self.f);
        (x & !mask) | ((j as u64) << (i * self.f))
    }

    /// Test bit of every field equal to `j`.
    #[inline]
    fn flags(&self, x: u64, j: usize) -> u64 {
        let y = x ^ (j as u64).wrapping_mul(self.ones);
        let hi = y & self.test;
        let z = (y - hi) | (hi >> (self.f - 1));
        self.test.wrapping_sub(z) & self.test
    }

    /// Fields equal to `j` among fields `[a, b)`.
    #[inline]
    fn count(&self, x: u64, j: usize, a: usize, b: usize) -> usize {
        (self.flags(x, j) & span_mask(a * self.f, b * self.f)).count_ones() as usize
    }

    /// Index of the `k`-th field equal to `j` at or after field `a`.
    #[inline]
    fn select(&self, x: u64, j: usize, a: usize, k: usize) -> usize {
        select_bit(self.flags(x, j) & span_mask(a * self.f, 64), k) / self.f
    }
}

#[inline]
fn span_mask(lo: usize, hi: usize) -> u64 {
    let below = |b: usize| if b >= 64 { u64::MAX } else { (1u64 << b) - 1 };
    below(hi) & !below(lo)
}

/// Position of the `k`-th set bit of `w` (`k >= 1`, at most `popcount(w)`).
fn select_bit(mut w: u64, mut k: usize) -> usize {
    let mut base = 0;
    loop {
        let c = (w & 0xff).count_ones() as usize;
        if k <= c {
            break;
        }
        k -= c;
        w >>= 8;
        base += 8;
    }
    for _ in 1..k {
        w &= w - 1;
    }
    base + w.trailing_zeros() as usize
}

/// Translation between loose big digits and their radix codes.
#[derive(Clone, Debug)]
enum Codec {
    /// Code `sum field_i c^i`, tabulated both ways.
    Eager { enc: IntVec, dec: IntVec },
    /// Codes handed out in order of first use; the last, shorter big digit
    /// has its own code space.
    Lazy { full: LazyAllocator, last: LazyAllocator },
}

#[derive(Clone, Debug)]
enum Store {
    Packed(IntVec),
    Radix { arr: CAryArray, codec: Codec },
}

/// The color vector, `r` colors per big digit.
#[derive(Clone, Debug)]
struct BigDigits {
    groups: usize,
    loose: Loose,
    store: Store,
}

impl BigDigits {
    fn new(n: usize, c: usize, r: usize, lazy: bool) -> Result<Self> {
        let f = (ceil_log2(c as u64) as usize).max(1);
        let loose = Loose::new(f, r);
        let groups = n.div_ceil(r);
        let store = if c.is_power_of_two() {
            Store::Packed(IntVec::new(groups, f * r))
        } else {
            let big = (c as u64).pow(r as u32);
            let rem = n - (groups - 1) * r;
            let mut spec = Vec::new();
            if groups > 1 {
                spec.push((big, groups - 1));
            }
            spec.push(((c as u64).pow(rem as u32), 1));
            let arr = CAryArray::build(&spec, RADIX_SEGMENT)?;
            let codec = if !lazy && f * r <= EAGER_BITS {
                let width = ceil_log2(big) as usize;
                let mut enc = IntVec::new(1 << (f * r), width);
                let mut dec = IntVec::new(big as usize, f * r);
                for code in 0..big {
                    let mut x = 0u64;
                    let mut v = code;
                    for i in 0..r {
                        x = loose.with_field(x, i, (v % c as u64) as usize);
                        v /= c as u64;
                    }
                    enc.set(x as usize, code);
                    dec.set(code as usize, x);
                }
                Codec::Eager { enc, dec }
            } else {
                let domain = 1usize << (f * r);
                let mut full = LazyAllocator::new(domain);
                let mut last = LazyAllocator::new(domain);
                // Code 0 is the all-zero digit, matching zeroed storage.
                full.allocate(1)?;
                last.allocate(1)?;
                Codec::Lazy { full, last }
            };
            Store::Radix { arr, codec }
        };
        Ok(BigDigits { groups, loose, store })
    }

    /// Loose form of group `g`.
    #[inline]
    fn get(&self, g: usize) -> u64 {
        probe::touch(1);
        match &self.store {
            Store::Packed(v) => v.get(g),
            Store::Radix { arr, codec } => {
                let code = arr.read(g + 1).expect("group in range");
                match codec {
                    Codec::Eager { dec, .. } => dec.get(code as usize),
                    Codec::Lazy { full, last } => {
                        let a = if g + 1 == self.groups { last } else { full };
                        a.inverse_unchecked(code as usize + 1) as u64 - 1
                    }
                }
            }
        }
    }

    fn set(&mut self, g: usize, x: u64) {
        probe::touch(1);
        let is_last = g + 1 == self.groups;
        match &mut self.store {
            Store::Packed(v) => v.set(g, x),
            Store::Radix { arr, codec } => {
                let code = match codec {
                    Codec::Eager { enc, .. } => enc.get(x as usize),
                    Codec::Lazy { full, last } => {
                        let a = if is_last { last } else { full };
                        a.allocate(x as usize + 1).expect("loose digit in range") as u64 - 1
                    }
                };
                arr.write(g + 1, code).expect("code within the digit base");
            }
        }
    }

    /// Color of element `i` (0-based).
    #[inline]
    fn color(&self, i: usize) -> usize {
        let r = self.loose.r;
        self.loose.field(self.get(i / r), i % r)
    }

    fn set_color(&mut self, i: usize, j: usize) {
        let r = self.loose.r;
        let x = self.get(i / r);
        let y = self.loose.with_field(x, i % r, j);
        self.set(i / r, y);
    }

    /// Occurrences of `j` among elements `[lo, hi)` (0-based).
    fn count(&self, lo: usize, hi: usize, j: usize) -> usize {
        let r = self.loose.r;
        let mut total = 0;
        let mut i = lo;
        while i < hi {
            let g = i / r;
            let b = (hi - g * r).min(r);
            total += self.loose.count(self.get(g), j, i % r, b);
            i = g * r + b;
        }
        total
    }

    /// The `k`-th occurrence of `j` at or after element `lo` (0-based),
    /// searching no further than `hi`.
    fn select(&self, lo: usize, hi: usize, j: usize, mut k: usize) -> Option<usize> {
        let r = self.loose.r;
        let mut i = lo;
        while i < hi {
            let g = i / r;
            let b = (hi - g * r).min(r);
            let x = self.get(g);
            let here = self.loose.count(x, j, i % r, b);
            if k <= here {
                return Some(g * r + self.loose.select(x, j, i % r, k));
            }
            k -= here;
            i = g * r + b;
        }
        None
    }

    /// Bits of the stored digits and the lookup tables.
    fn bits(&self) -> u64 {
        match &self.store {
            Store::Packed(v) => v.bits_used(),
            Store::Radix { arr, codec } => {
                let tables = match codec {
                    Codec::Eager { enc, dec } => enc.bits_used() + dec.bits_used(),
                    Codec::Lazy { full, last } => full.bits_used() + last.bits_used(),
                };
                word_bits(arr.payload_bits() as u64) + arr.table_bits() + tables + 64 * 4
            }
        }
    }
}

impl Blocks for BigDigits {
    fn next_eq(&self, lo: usize, hi: usize, v: u64) -> Option<usize> {
        self.select(lo, hi, v as usize, 1)
    }
}

/// Colors per big digit: `r' = ceil(sqrt(r/2))^2` with `r` the largest
/// value keeping `c^r <= sqrt(n)`, and the loose form within one word.
fn group_size(n: usize, c: usize) -> usize {
    let lc = (c.max(2) as f64).log2();
    let ln = (n.max(2) as f64).log2();
    let r = ((ln / (2.0 * lc)).floor() as usize).max(1);
    let rb = ((r as f64 / 2.0).sqrt().ceil() as usize).max(1);
    let f = (ceil_log2(c as u64) as usize).max(1);
    let mut rp = rb * rb;
    while rp > 1 && (rp * f > 64 || (c.max(2) as f64).log2() * rp as f64 > 62.0) {
        rp -= 1;
    }
    rp
}

/// Per-color counts of the ranges of one segment.
#[derive(Clone, Debug)]
struct RangeCounts {
    counts: Vec<SearchablePrefixSums>,
}

impl RangeCounts {
    fn new(len: usize, c: usize, range: usize) -> Result<Self> {
        let ranges = len.div_ceil(range);
        let b = bits_for(len as u64).max(1);
        let last = (len - (ranges - 1) * range) as u64;
        let counts = (0..c)
            .map(|j| {
                if j == 0 {
                    // Every element starts with color 0.
                    SearchablePrefixSums::with_initial(ranges, b, 1, range as u64, last)
                } else {
                    SearchablePrefixSums::new(ranges, b, 1)
                }
            })
            .collect::<Result<_>>()?;
        Ok(RangeCounts { counts })
    }

    fn size(&self, j: usize) -> usize {
        self.counts[j].total() as usize
    }

    /// Rank of local element `l` (1-based) of a segment starting at `start`.
    fn rank(&self, digits: &BigDigits, start: usize, range: usize, l: usize) -> (usize, usize) {
        let j = digits.color(start + l - 1);
        let i = (l - 1) / range;
        let before = self.counts[j].sum(i).expect("range index") as usize;
        (j, before + digits.count(start + i * range, start + l, j))
    }

    /// Local position of the `k`-th element of color `j`, 0 if none.
    fn select(&self, digits: &BigDigits, start: usize, len: usize, range: usize, j: usize, k: usize) -> usize {
        if k == 0 || k > self.size(j) {
            return 0;
        }
        let i = self.counts[j].search(k as u64).expect("key in range");
        let rest = k - self.counts[j].sum(i - 1).expect("range index") as usize;
        let lo = start + (i - 1) * range;
        let hi = (lo + range).min(start + len);
        digits.select(lo, hi, j, rest).expect("range count out of sync") - start + 1
    }

    fn recolor(&mut self, range: usize, l: usize, old: usize, new: usize) {
        let i = (l - 1) / range + 1;
        self.counts[old].update(i, -1).expect("count of the old color");
        self.counts[new].update(i, 1).expect("count of the new color");
    }

    fn bits(&self) -> u64 {
        self.counts.iter().map(|p| p.bits_used()).sum::<u64>() + 64
    }
}

/// Order-respecting rank and select within one segment of `n` elements.
#[derive(Clone, Debug)]
pub struct SegmentRankSelect {
    n: usize,
    c: usize,
    range: usize,
    digits: BigDigits,
    counts: RangeCounts,
}

impl SegmentRankSelect {
    pub fn new(n: usize, c: usize, t: u32) -> Result<Self> {
        if n == 0 || c == 0 {
            return Err(Error::OutOfRange { what: "segment shape", value: 0 });
        }
        let r = group_size(n, c);
        let range = r * t.max(1) as usize;
        Ok(SegmentRankSelect { n, c, range, digits: BigDigits::new(n, c, r, false)?, counts: RangeCounts::new(n, c, range)? })
    }

    /// Colors per big digit.
    pub fn group_size(&self) -> usize {
        self.digits.loose.r
    }

    fn check_l(&self, l: usize) -> Result<()> {
        crate::check_range("element", l as u64, 1, self.n as u64)
    }

    fn check_j(&self, j: usize) -> Result<()> {
        crate::check_range("color", j as u64, 0, self.c as u64 - 1)
    }

    pub fn color(&self, l: usize) -> Result<usize> {
        self.check_l(l)?;
        Ok(self.digits.color(l - 1))
    }

    pub fn setcolor(&mut self, j: usize, l: usize) -> Result<()> {
        self.check_l(l)?;
        self.check_j(j)?;
        let old = self.digits.color(l - 1);
        if old != j {
            self.digits.set_color(l - 1, j);
            self.counts.recolor(self.range, l, old, j);
        }
        Ok(())
    }

    pub fn count(&self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        Ok(self.counts.size(j))
    }

    /// `(color(l), number of elements of that color in 1..=l)`.
    pub fn seg_rank(&self, l: usize) -> Result<(usize, usize)> {
        self.check_l(l)?;
        Ok(self.counts.rank(&self.digits, 0, self.range, l))
    }

    /// The `k`-th smallest element of color `j`, 0 if there is none.
    pub fn seg_select(&self, j: usize, k: usize) -> Result<usize> {
        self.check_j(j)?;
        crate::check_range("rank", k as u64, 1, u64::MAX)?;
        Ok(self.counts.select(&self.digits, 0, self.n, self.range, j, k))
    }
}

impl SpaceUsage for SegmentRankSelect {
    fn bits_used(&self) -> u64 {
        self.digits.bits() + self.counts.bits() + 64 * 3
    }
}

/// A `c`-color dictionary with p-rank, p-select, uniform choice and robust
/// iteration in time `O(t)`.
///
/// Within color `j`, the *weight* of a segment is its number of elements
/// of color `j`. Per color, a dense dictionary over the full segments
/// classifies them by weight and a prefix-sum structure holds, for every
/// weight `i`, `i` times the number of segments of that weight. The
/// segment left over at the end of the universe is handled on its own.
#[derive(Clone, Debug)]
pub struct ColorWeightIndex {
    n: usize,
    c: usize,
    t: u32,
    seg: usize,
    range: usize,
    full: usize,
    digits: BigDigits,
    // Index full segments first, then the leftover one.
    bottoms: Vec<Option<RangeCounts>>,
    live: SystematicChoiceDict,
    // Per color, segments by weight; color 0 keyed by seg - weight.
    weights: Vec<DenseChoiceDict>,
    classes: Vec<SearchablePrefixSums>,
    sizes: Vec<usize>,
    planted: Planted,
}

impl ColorWeightIndex {
    pub fn new(n: usize, c: usize, t: u32) -> Result<Self> {
        Self::build(n, c, t, None, false)
    }

    pub(crate) fn build(n: usize, c: usize, t: u32, r: Option<usize>, lazy: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfRange { what: "universe", value: 0 });
        }
        if c == 0 {
            return Err(Error::OutOfRange { what: "colors", value: 0 });
        }
        let t = t.max(1);
        let r = r.unwrap_or_else(|| group_size(n, c));
        let range = r * t as usize;
        let lg = (ceil_log2(n as u64) as usize).max(1);
        let seg = (t as usize * lg * lg).div_ceil(range) * range;
        let full = n / seg;
        let digits = BigDigits::new(n, c, r, lazy)?;
        let (weights, classes) = if full > 0 {
            let b = bits_for(n as u64);
            let delta = bits_for(seg as u64);
            let weights = (0..c).map(|_| DenseChoiceDict::new(full, seg + 1)).collect();
            let classes = (0..c)
                .map(|j| {
                    let last = if j == 0 { (full * seg) as u64 } else { 0 };
                    SearchablePrefixSums::with_initial(seg + 1, b, delta, 0, last)
                })
                .collect::<Result<_>>()?;
            (weights, classes)
        } else {
            (Vec::new(), Vec::new())
        };
        let f = (ceil_log2(c as u64) as usize).max(1);
        Ok(ColorWeightIndex {
            n,
            c,
            t,
            seg,
            range,
            full,
            digits,
            bottoms: vec![None; full + usize::from(n % seg != 0)],
            live: SystematicChoiceDict::new(full + 1, 1),
            weights,
            classes,
            sizes: vec![0; c],
            planted: Planted::new(n, c, t, f),
        })
    }

    /// Elements per segment.
    pub fn segment_size(&self) -> usize {
        self.seg
    }

    /// Colors per big digit.
    pub fn group_size(&self) -> usize {
        self.digits.loose.r
    }

    pub fn trade_off(&self) -> u32 {
        self.t
    }

    fn check_l(&self, l: usize) -> Result<()> {
        crate::check_range("element", l as u64, 1, self.n as u64)
    }

    fn check_j(&self, j: usize) -> Result<()> {
        crate::check_range("color", j as u64, 0, self.c as u64 - 1)
    }

    fn seg_len(&self, s: usize) -> usize {
        (self.n - s * self.seg).min(self.seg)
    }

    fn bottom(&self, s: usize) -> Option<&RangeCounts> {
        if self.live.leaf(s + 1) {
            self.bottoms[s].as_ref()
        } else {
            None
        }
    }

    fn ensure_bottom(&mut self, s: usize) -> Result<()> {
        if !self.live.leaf(s + 1) {
            self.bottoms[s] = Some(RangeCounts::new(self.seg_len(s), self.c, self.range)?);
            self.live.put(s + 1, true);
        }
        Ok(())
    }

    /// Elements of color `j` in segment `s`.
    fn weight(&self, j: usize, s: usize) -> usize {
        let key = self.weights[j].color_unchecked(s + 1);
        if j == 0 {
            self.seg - key
        } else {
            key
        }
    }

    fn key(&self, j: usize, w: usize) -> usize {
        if j == 0 {
            self.seg - w
        } else {
            w
        }
    }

    /// Local select in segment `s`.
    fn local_select(&self, s: usize, j: usize, k: usize) -> usize {
        match self.bottom(s) {
            Some(b) => b.select(&self.digits, s * self.seg, self.seg_len(s), self.range, j, k),
            None => usize::from(j == 0 && k <= self.seg_len(s)) * k,
        }
    }

    fn local_rank(&self, s: usize, l: usize) -> (usize, usize) {
        match self.bottom(s) {
            Some(b) => b.rank(&self.digits, s * self.seg, self.range, l),
            None => (0, l),
        }
    }

    fn full_size(&self, j: usize) -> usize {
        if self.full == 0 {
            0
        } else {
            self.classes[j].total() as usize
        }
    }

    fn move_weight(&mut self, j: usize, s: usize, up: bool) {
        let w = self.weight(j, s);
        let w2 = if up { w + 1 } else { w - 1 };
        let key = self.key(j, w2);
        self.weights[j].setcolor_unchecked(key, s + 1);
        let cls = &mut self.classes[j];
        if w > 0 {
            cls.update(w + 1, -(w as i64)).expect("class total");
        }
        if w2 > 0 {
            cls.update(w2 + 1, w2 as i64).expect("class total");
        }
    }

    /// Class vector of color `j`: entry `i + 1` is `i` times the number of
    /// full segments of weight `i`.
    pub fn class_entries(&self, j: usize) -> Result<Vec<u64>> {
        self.check_j(j)?;
        if self.full == 0 {
            return Ok(Vec::new());
        }
        (1..=self.seg + 1).map(|i| self.classes[j].value(i)).collect()
    }

    /// `p_select(j, k)` for uniformly random `k`; 0 if `S_j` is empty.
    pub fn uniform_choice<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> Result<usize> {
        crate::traits::uniform_choice(self, j, rng)
    }
}

impl ColorDict for ColorWeightIndex {
    fn universe(&self) -> usize {
        self.n
    }
    fn num_colors(&self) -> usize {
        self.c
    }
    fn color(&self, l: usize) -> Result<usize> {
        self.check_l(l)?;
        Ok(self.digits.color(l - 1))
    }
    fn setcolor(&mut self, j: usize, l: usize) -> Result<()> {
        self.check_l(l)?;
        self.check_j(j)?;
        let old = self.digits.color(l - 1);
        if old == j {
            return Ok(());
        }
        let s = (l - 1) / self.seg;
        self.ensure_bottom(s)?;
        self.digits.set_color(l - 1, j);
        let range = self.range;
        self.bottoms[s].as_mut().unwrap().recolor(range, l - s * self.seg, old, j);
        if s < self.full {
            self.move_weight(old, s, false);
            self.move_weight(j, s, true);
        }
        self.sizes[old] = self.sizes[old].wrapping_sub(1);
        self.sizes[j] = self.sizes[j].wrapping_add(1);
        self.planted.recolor(&self.digits, l, old, j);
        Ok(())
    }
    fn choice(&self, j: usize) -> Result<usize> {
        self.p_select(j, 1)
    }
    fn size(&self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        Ok(if j == 0 { self.n.wrapping_sub(self.sizes[1..].iter().sum::<usize>()) } else { self.sizes[j] })
    }
}

impl PRankSelect for ColorWeightIndex {
    fn p_rank(&self, l: usize) -> Result<usize> {
        self.check_l(l)?;
        let s = (l - 1) / self.seg;
        let (j, k) = self.local_rank(s, l - s * self.seg);
        if s >= self.full {
            return Ok(self.full_size(j) + k);
        }
        let w = self.weight(j, s);
        let q = self.weights[j].p_rank(s + 1)?;
        Ok(self.classes[j].sum(w)? as usize + (q - 1) * w + k)
    }

    fn p_select(&self, j: usize, k: usize) -> Result<usize> {
        self.check_j(j)?;
        crate::check_range("rank", k as u64, 1, u64::MAX)?;
        let inner = self.full_size(j);
        if k > inner {
            if self.full == self.bottoms.len() {
                return Ok(0);
            }
            let local = self.local_select(self.full, j, k - inner);
            return Ok(if local == 0 { 0 } else { self.full * self.seg + local });
        }
        let cls = &self.classes[j];
        let pos = cls.search(k as u64)?;
        let w = pos - 1;
        let p = k - cls.sum(pos - 1)? as usize;
        let q = p.div_ceil(w);
        let s = self.weights[j].p_select_unchecked(self.key(j, w), q) - 1;
        Ok(s * self.seg + self.local_select(s, j, p - (q - 1) * w))
    }
}

impl Iterable for ColorWeightIndex {
    fn iter_init(&mut self, j: usize) -> Result<()> {
        self.check_j(j)?;
        self.planted.iter_init(j);
        Ok(())
    }
    fn iter_more(&mut self, j: usize) -> Result<bool> {
        self.check_j(j)?;
        self.planted.iter_more(&self.digits, j)
    }
    fn iter_next(&mut self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        let digits = &self.digits;
        self.planted.iter_next(digits, j)
    }
}

impl SpaceUsage for ColorWeightIndex {
    fn bits_used(&self) -> u64 {
        let bottoms: u64 = self.bottoms.iter().flatten().map(RangeCounts::bits).sum();
        let weights: u64 = self.weights.iter().map(|d| d.bits_used()).sum();
        let classes: u64 = self.classes.iter().map(|p| p.bits_used()).sum();
        self.digits.bits()
            + bottoms
            + 64 * self.bottoms.len() as u64
            + self.live.bits_used()
            + weights
            + classes
            + 64 * self.sizes.len() as u64
            + self.planted.bits_used()
            + 64 * 8
    }
}
