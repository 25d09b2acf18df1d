//! Multisets over `{1, ..., n}` with `insert` and `extract_choice` in
//! `O(m log(2 + n/(m+1)) + 1)` bits.
//!
//! Elements live in two *reservoirs*, sorted and stored as difference
//! codes, and two unsorted *buffers* of `ceil(log2 (n+1))`-bit cells. New
//! elements go to the active buffer. Once it is large, it is sorted by a
//! two-pass radix sort and merged with its reservoir into the other
//! reservoir, all in a background process advanced by a fixed number of
//! steps per operation.

use crate::bits::IntVec;
use crate::space::SpaceUsage;
use crate::{bits_for, Error, Result};

/// A bit string whose last partial word is kept apart from the full ones,
/// so the stored words never exceed the length.
#[derive(Clone, Debug, Default)]
pub struct BitBuf {
    body: Vec<u64>,
    tail: u64,
    len: usize,
}

impl BitBuf {
    const EMPTY: BitBuf = BitBuf { body: Vec::new(), tail: 0, len: 0 };

    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn word(&self, i: usize) -> u64 {
        match i.cmp(&self.body.len()) {
            std::cmp::Ordering::Less => self.body[i],
            std::cmp::Ordering::Equal => self.tail,
            std::cmp::Ordering::Greater => 0,
        }
    }

    /// `k <= 64` bits starting at `pos`; bits past the end read 0.
    #[inline]
    pub fn get(&self, pos: usize, k: usize) -> u64 {
        if k == 0 {
            return 0;
        }
        let (q, r) = (pos / 64, pos % 64);
        let mut v = self.word(q) >> r;
        if r + k > 64 {
            v |= self.word(q + 1) << (64 - r);
        }
        if k < 64 {
            v &= (1u64 << k) - 1;
        }
        v
    }

    /// Appends the low `k <= 64` bits of `v`.
    #[inline]
    pub fn push(&mut self, v: u64, k: usize) {
        if k == 0 {
            return;
        }
        let v = if k < 64 { v & ((1u64 << k) - 1) } else { v };
        let r = self.len % 64;
        self.tail |= v << r;
        if r + k >= 64 {
            self.body.push(self.tail);
            self.tail = if r == 0 { 0 } else { v >> (64 - r) };
        }
        self.len += k;
    }

    /// Overwrites `k <= 64` bits at `pos`; `pos + k` must not exceed the
    /// length.
    pub fn set(&mut self, pos: usize, k: usize, v: u64) {
        debug_assert!(pos + k <= self.len);
        let (q, r) = (pos / 64, pos % 64);
        let mask = if k < 64 { (1u64 << k) - 1 } else { u64::MAX };
        let v = v & mask;
        let body = self.body.len();
        let mut put = |i: usize, clear: u64, bits: u64| {
            let w = if i < body { &mut self.body[i] } else { &mut self.tail };
            *w = *w & !clear | bits;
        };
        put(q, mask << r, v << r);
        if r + k > 64 {
            put(q + 1, mask >> (64 - r), v >> (64 - r));
        }
    }

    pub fn truncate(&mut self, len: usize) {
        if len >= self.len {
            return;
        }
        let q = len / 64;
        if q < self.body.len() {
            self.tail = self.body[q];
            self.body.truncate(q);
        }
        let r = len % 64;
        self.tail &= if r == 0 { 0 } else { (1u64 << r) - 1 };
        self.len = len;
    }

    pub fn clear(&mut self) {
        *self = BitBuf::default();
    }
}

impl SpaceUsage for BitBuf {
    fn bits_used(&self) -> u64 {
        64 * self.body.len() as u64 + 128
    }
}

/// Self-delimiting codes for nonnegative integers.
///
/// With `L = floor(log2(d + 1)) + 1` and `k = floor(log2(L + 1)) + 1`, the
/// one-way code of `d` is `d + 1` in `L` bits, then `L` in `k` bits, then a
/// 1 and `k` zeros; it is read from its end. The two-way code also puts the
/// mirror image of the length part in front, so it reads from either end.
pub struct DeltaCode;

impl DeltaCode {
    #[inline]
    fn lengths(d: u64) -> (usize, usize) {
        let l = 64 - (d + 1).leading_zeros() as usize;
        let k = 64 - (l as u64 + 1).leading_zeros() as usize;
        (l, k)
    }

    /// Length of the one-way code.
    pub fn len(d: u64) -> usize {
        let (l, k) = Self::lengths(d);
        l + 2 * k + 1
    }

    /// Length of the two-way code.
    pub fn len_bidir(d: u64) -> usize {
        let (l, k) = Self::lengths(d);
        l + 4 * k + 2
    }

    pub fn push(buf: &mut BitBuf, d: u64) {
        let (l, k) = Self::lengths(d);
        buf.push(d + 1, l);
        buf.push(l as u64, k);
        buf.push(1, 1);
        buf.push(0, k);
    }

    pub fn push_bidir(buf: &mut BitBuf, d: u64) {
        let (l, k) = Self::lengths(d);
        buf.push(1 << k, k + 1);
        buf.push(l as u64, k);
        Self::push(buf, d);
    }

    /// Length part read backwards from `end`: `(L, k)`.
    #[inline]
    fn tail_lengths(buf: &BitBuf, end: usize) -> (usize, usize) {
        let w = end.min(64);
        let x = buf.get(end - w, w);
        let k = w - 1 - (63 - x.leading_zeros() as usize);
        let l = buf.get(end - 2 * k - 1, k) as usize;
        (l, k)
    }

    /// Decodes the one-way code ending at `end`: `(d, start)`.
    pub fn read_back(buf: &BitBuf, end: usize) -> (u64, usize) {
        let (l, k) = Self::tail_lengths(buf, end);
        let start = end - 2 * k - 1 - l;
        (buf.get(start, l) - 1, start)
    }

    /// Decodes the two-way code ending at `end`: `(d, start)`.
    pub fn read_back_bidir(buf: &BitBuf, end: usize) -> (u64, usize) {
        let (l, k) = Self::tail_lengths(buf, end);
        let p = end - 2 * k - 1 - l;
        (buf.get(p, l) - 1, p - 2 * k - 1)
    }

    /// Decodes the two-way code starting at `start`: `(d, end)`.
    pub fn read_fwd(buf: &BitBuf, start: usize) -> (u64, usize) {
        let x = buf.get(start, 64);
        let k = x.trailing_zeros() as usize;
        let l = buf.get(start + k + 1, k) as usize;
        let p = start + 2 * k + 1;
        (buf.get(p, l) - 1, p + l + 2 * k + 1)
    }

    /// Decodes a two-way code at the low end of `w`, if one lies entirely
    /// within its low `avail` bits: `(d, length)`.
    pub fn read_word(w: u64, avail: usize) -> Option<(u64, usize)> {
        let k = w.trailing_zeros() as usize;
        if k == 0 || 2 * k + 1 > avail {
            return None;
        }
        let l = ((w >> (k + 1)) & ((1 << k) - 1)) as usize;
        let total = l + 4 * k + 2;
        if l == 0 || total > avail {
            return None;
        }
        let p = (w >> (2 * k + 1)) & if l >= 64 { u64::MAX } else { (1 << l) - 1 };
        Some((p.checked_sub(1)?, total))
    }
}

/// A bounded-universe sorted stack: a nondecreasing sequence in `{1..n}`
/// stored as the codes of its differences, with `x_0 = 1` in front and
/// `x_{m+1} = n` behind.
#[derive(Clone, Debug)]
pub struct SortedStack {
    n: u64,
    b: BitBuf,
}

impl SortedStack {
    pub fn new(n: u64) -> Result<Self> {
        if n == 0 || n >> 62 != 0 {
            return Err(Error::OutOfRange { what: "universe", value: n });
        }
        let mut b = BitBuf::new();
        DeltaCode::push(&mut b, n - 1);
        Ok(SortedStack { n, b })
    }

    pub fn universe(&self) -> u64 {
        self.n
    }

    /// `(top, start of the last code)`; the top of an empty stack is 1.
    fn last(&self) -> (u64, usize) {
        let (d, s) = DeltaCode::read_back(&self.b, self.b.len());
        (self.n - d, s)
    }

    pub fn is_empty(&self) -> bool {
        self.last().1 == 0
    }

    pub fn top(&self) -> Option<u64> {
        let (x, s) = self.last();
        (s > 0).then_some(x)
    }

    /// Pushes `x` if it is at least the top; returns whether it did.
    pub fn sorted_push(&mut self, x: u64) -> Result<bool> {
        crate::check_range("element", x, 1, self.n)?;
        let (top, s) = self.last();
        if x < top {
            return Ok(false);
        }
        self.b.truncate(s);
        DeltaCode::push(&mut self.b, x - top);
        DeltaCode::push(&mut self.b, self.n - x);
        Ok(true)
    }

    /// Removes and returns the top, 0 if empty.
    pub fn pop(&mut self) -> u64 {
        let (x, s) = self.last();
        if s == 0 {
            return 0;
        }
        let (d, s0) = DeltaCode::read_back(&self.b, s);
        self.b.truncate(s0);
        DeltaCode::push(&mut self.b, self.n - (x - d));
        x
    }

    /// Length of the code string.
    pub fn code_bits(&self) -> usize {
        self.b.len()
    }
}

impl SpaceUsage for SortedStack {
    fn bits_used(&self) -> u64 {
        self.b.bits_used() + 64
    }
}

/// Sorted sequence in two-way difference form, consumable at both ends.
#[derive(Clone, Debug, Default)]
struct DiffSeq {
    buf: BitBuf,
    // Bit position of the first remaining code, and the value before it.
    front: usize,
    base: u64,
    last: u64,
    count: usize,
}

impl DiffSeq {
    const EMPTY: DiffSeq = DiffSeq { buf: BitBuf::EMPTY, front: 0, base: 0, last: 0, count: 0 };

    fn is_empty(&self) -> bool {
        self.count == 0
    }

    fn reset(&mut self) {
        *self = DiffSeq::default();
    }

    fn push_back(&mut self, x: u64) {
        let prev = if self.count == 0 { self.base } else { self.last };
        debug_assert!(x >= prev);
        DeltaCode::push_bidir(&mut self.buf, x - prev);
        self.last = x;
        self.count += 1;
    }

    fn pop_back(&mut self) -> u64 {
        let x = self.last;
        let (d, s) = DeltaCode::read_back_bidir(&self.buf, self.buf.len());
        self.buf.truncate(s);
        self.last = x - d;
        self.count -= 1;
        if self.count == 0 {
            self.reset();
        }
        x
    }

    fn peek_front(&self) -> u64 {
        self.base + DeltaCode::read_fwd(&self.buf, self.front).0
    }

    fn pop_front(&mut self) -> u64 {
        let (d, end) = DeltaCode::read_fwd(&self.buf, self.front);
        self.front = end;
        self.base += d;
        self.count -= 1;
        let x = self.base;
        if self.count == 0 {
            self.reset();
        }
        x
    }

    fn bits(&self) -> u64 {
        self.buf.bits_used() + 64 * 4
    }
}

/// A reservoir with its iteration bookkeeping: codes before `live_end`
/// (from the front on) are live, and so are the values in `list`, which
/// all sit beyond `live_end`.
#[derive(Clone, Debug, Default)]
struct Reservoir {
    seq: DiffSeq,
    live_end: usize,
    live_val: u64,
    list: DiffSeq,
}

impl Reservoir {
    fn clear(&mut self) {
        *self = Reservoir::default();
    }

    fn area_nonempty(&self) -> bool {
        !self.seq.is_empty() && self.live_end > self.seq.front
    }

    fn mark_all_live(&mut self) {
        self.live_end = self.seq.buf.len();
        self.live_val = self.seq.last;
        self.list.reset();
    }

    /// Removes the last element, keeping the live bookkeeping in step.
    fn pop_back(&mut self) -> u64 {
        let in_area = self.live_end == self.seq.buf.len() && self.area_nonempty();
        let x = self.seq.pop_back();
        if in_area {
            self.live_end = self.seq.buf.len();
            self.live_val = self.seq.last;
        } else if !self.list.is_empty() && self.list.last == x {
            self.list.pop_back();
        }
        if self.seq.is_empty() {
            self.clear();
        }
        x
    }

    /// Removes the first element; returns it with its liveness.
    fn pop_front(&mut self) -> (u64, bool) {
        let in_area = self.live_end > self.seq.front;
        let x = self.seq.pop_front();
        let live = in_area || (!self.list.is_empty() && self.list.peek_front() == x && {
            self.list.pop_front();
            true
        });
        if self.seq.is_empty() {
            self.clear();
        }
        (x, live)
    }

    /// Takes one live element out of the bookkeeping (it stays stored).
    fn enumerate(&mut self) -> u64 {
        if !self.list.is_empty() {
            return self.list.pop_back();
        }
        let x = self.live_val;
        let (d, s) = DeltaCode::read_back_bidir(&self.seq.buf, self.live_end);
        self.live_end = s;
        self.live_val = x - d;
        x
    }

    fn has_live(&self) -> bool {
        !self.list.is_empty() || self.area_nonempty()
    }

    fn bits(&self) -> u64 {
        self.seq.bits() + self.list.bits() + 128
    }
}

/// Unsorted cells of fixed width; cells `0..live` are live.
#[derive(Clone, Debug, Default)]
struct Buffer {
    cells: BitBuf,
    size: usize,
    live: usize,
}

impl Buffer {
    fn push(&mut self, x: u64, w: usize) {
        self.cells.push(x, w);
        self.size += 1;
    }

    fn pop(&mut self, w: usize) -> u64 {
        self.size -= 1;
        let x = self.cells.get(self.size * w, w);
        self.cells.truncate(self.size * w);
        self.live = self.live.min(self.size);
        x
    }

    fn get(&self, i: usize, w: usize) -> u64 {
        self.cells.get(i * w, w)
    }

    /// Appends `x`, keeping it inside the live prefix if `live`.
    fn push_keeping(&mut self, x: u64, live: bool, w: usize) {
        self.push(x, w);
        if live {
            let (p, last) = (self.live, self.size - 1);
            if p != last {
                let y = self.get(p, w);
                self.cells.set(p * w, w, x);
                self.cells.set(last * w, w, y);
            }
            self.live += 1;
        }
    }

    fn bits(&self) -> u64 {
        self.cells.bits_used() + 128
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Stage {
    Hist1,
    Prefix1,
    Scatter1,
    Hist2,
    Prefix2,
    Scatter2,
}

/// Radix sort of buffer `k`, then its merge with reservoir `k` into
/// reservoir `1 - k`. Sorted entries carry a liveness bit. Only the first
/// `size` cells of `src` are sorted; the rest stay extractable and are
/// handed back to the active buffer at the end of the first scatter.
#[derive(Clone, Debug)]
struct Background {
    k: usize,
    stage: Option<Stage>,
    i: usize,
    acc: u64,
    size: usize,
    live0: usize,
    src: Buffer,
    counts: IntVec,
    t: IntVec,
    a: IntVec,
    // Bits of reservoir k when the buffer was switched out.
    target: u64,
    late: bool,
}

/// Step budgets of the background processes, per public operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolConfig {
    pub merge_steps: usize,
    pub table_steps: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig { merge_steps: 8, table_steps: 8 }
    }
}

/// Counts of background deadlines that were missed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DeadlineReport {
    /// An extraction during a sort found the reservoir and the active
    /// buffer empty, and the sort had to be finished on the spot.
    pub reservoir_starved: u64,
    /// The active buffer reached its switch size while the merge was
    /// still running.
    pub merge_late: u64,
    /// The active buffer reached `2 sqrt n` elements before the merge
    /// tables were complete.
    pub tables_late: u64,
}

impl DeadlineReport {
    pub fn total(&self) -> u64 {
        self.reservoir_starved + self.merge_late + self.tables_late
    }
}

/// Merge lookup tables for chunks of `width` bits: for every chunk, the
/// complete codes at its start; for every chunk and bound, the longest
/// prefix of those codes whose differences sum to at most the bound.
#[derive(Clone, Debug)]
struct Tables {
    width: usize,
    // Entries are (count, bits, sum) packed as count | bits << 8 | sum << 16.
    whole: IntVec,
    bounded: IntVec,
    built: usize,
}

impl Tables {
    fn new(width: usize) -> Self {
        let ew = 16 + width + 8;
        Tables { width, whole: IntVec::new(1 << width, ew), bounded: IntVec::new(1 << (2 * width), ew), built: 0 }
    }

    fn total(&self) -> usize {
        self.whole.len() + self.bounded.len()
    }

    fn complete(&self) -> bool {
        self.built == self.total()
    }

    /// Codes at the start of `chunk` whose running sum stays within `bound`.
    fn scan(&self, chunk: u64, bound: u64) -> u64 {
        let (mut count, mut bits, mut sum) = (0u64, 0usize, 0u64);
        while let Some((d, len)) = DeltaCode::read_word(chunk >> bits, self.width - bits) {
            if sum + d > bound {
                break;
            }
            count += 1;
            bits += len;
            sum += d;
        }
        count | (bits as u64) << 8 | sum << 16
    }

    fn step(&mut self) {
        let w = self.width;
        let i = self.built;
        if i < self.whole.len() {
            let e = self.scan(i as u64, u64::MAX);
            self.whole.set(i, e);
        } else {
            let j = i - self.whole.len();
            let e = self.scan((j >> w) as u64, (j & ((1 << w) - 1)) as u64);
            self.bounded.set(j, e);
        }
        self.built += 1;
    }

    fn unpack(e: u64) -> (usize, usize, u64) {
        ((e & 0xff) as usize, ((e >> 8) & 0xff) as usize, e >> 16)
    }

    fn bits(&self) -> u64 {
        self.whole.bits_used() + self.bounded.bits_used() + 128
    }
}

/// A multiset over `{1, ..., n}` with `insert`, `extract_choice` and
/// robust iteration, all in constant time per operation.
/// A component that is boxed only while it holds something; a vacant slot
/// costs one pointer.
#[derive(Clone, Debug, Default)]
struct Slot<T>(Option<Box<T>>);

trait Vacant: Default + 'static {
    fn vacant(&self) -> bool;
    fn empty() -> &'static Self;
}

impl Vacant for Reservoir {
    fn vacant(&self) -> bool {
        self.seq.is_empty() && self.list.is_empty() && self.live_end == 0 && self.live_val == 0
    }
    fn empty() -> &'static Self {
        static E: Reservoir = Reservoir { seq: DiffSeq::EMPTY, live_end: 0, live_val: 0, list: DiffSeq::EMPTY };
        &E
    }
}

impl Vacant for Buffer {
    fn vacant(&self) -> bool {
        self.size == 0 && self.live == 0
    }
    fn empty() -> &'static Self {
        static E: Buffer = Buffer { cells: BitBuf::EMPTY, size: 0, live: 0 };
        &E
    }
}

impl<T: Vacant> Slot<T> {
    fn settle(&mut self) {
        if self.0.as_ref().is_some_and(|b| b.vacant()) {
            self.0 = None;
        }
    }
}

impl<T: Vacant> std::ops::Deref for Slot<T> {
    type Target = T;
    fn deref(&self) -> &T {
        match &self.0 {
            Some(b) => b,
            None => T::empty(),
        }
    }
}

impl<T: Vacant> std::ops::DerefMut for Slot<T> {
    fn deref_mut(&mut self) -> &mut T {
        self.0.get_or_insert_with(Box::default)
    }
}

#[derive(Clone, Debug)]
pub struct Pool {
    n: u64,
    w: usize,
    sqrt_n: usize,
    chunk: usize,
    cfg: PoolConfig,
    size: u64,
    res: [Slot<Reservoir>; 2],
    buf: [Slot<Buffer>; 2],
    active: usize,
    bg: Option<Background>,
    tables: Option<Tables>,
    // Liveness of elements inside the background process.
    all_live: bool,
    transit_live: usize,
    misses: DeadlineReport,
}

impl Pool {
    pub fn new(n: u64) -> Result<Self> {
        Self::with_config(n, PoolConfig::default())
    }

    pub fn with_config(n: u64, cfg: PoolConfig) -> Result<Self> {
        if n == 0 || n >> 40 != 0 {
            return Err(Error::OutOfRange { what: "universe", value: n });
        }
        if cfg.merge_steps == 0 {
            return Err(Error::Precondition("the merge needs a positive step budget"));
        }
        let lg = 64 - n.leading_zeros() as usize;
        Ok(Pool {
            n,
            w: bits_for(n) as usize,
            sqrt_n: ((n as f64).sqrt().ceil() as usize).max(1),
            chunk: if n >= 32 { lg / 5 } else { 0 },
            cfg,
            size: 0,
            res: Default::default(),
            buf: Default::default(),
            active: 0,
            bg: None,
            tables: None,
            all_live: false,
            transit_live: 0,
            misses: DeadlineReport::default(),
        })
    }

    pub fn universe(&self) -> u64 {
        self.n
    }

    /// Number of elements, with multiplicity.
    pub fn len(&self) -> u64 {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn deadline_misses(&self) -> DeadlineReport {
        self.misses
    }

    /// Whether a sort or merge is pending.
    pub fn merging(&self) -> bool {
        self.bg.is_some()
    }

    pub fn insert(&mut self, l: u64) -> Result<()> {
        crate::check_range("element", l, 1, self.n)?;
        let a = self.active;
        self.buf[a].push(l, self.w);
        self.size += 1;
        let big = self.buf[a].size >= 2 * self.sqrt_n;
        let full = big && self.buf[a].bits() >= self.res[a].seq.bits();
        if self.buf[a].size == 2 * self.sqrt_n && self.chunk > 0 && !self.tables.as_ref().is_some_and(Tables::complete) {
            self.misses.tables_late += 1;
        }
        let bits = self.buf[a].bits();
        match &mut self.bg {
            None if full => self.switch(),
            Some(bg) if big && !bg.late && bits >= bg.target => {
                bg.late = true;
                self.misses.merge_late += 1;
            }
            _ => {}
        }
        self.background();
        self.settle();
        Ok(())
    }

    /// Removes and returns some element, 0 if the pool is empty.
    pub fn extract_choice(&mut self) -> u64 {
        if self.size == 0 {
            return 0;
        }
        let x = self.take();
        self.size -= 1;
        self.background();
        self.settle();
        x
    }

    fn settle(&mut self) {
        self.res.iter_mut().for_each(Slot::settle);
        self.buf.iter_mut().for_each(Slot::settle);
    }

    fn take(&mut self) -> u64 {
        let a = self.active;
        match &self.bg {
            Some(bg) if bg.stage.is_some() => {
                let k = bg.k;
                if !self.res[k].seq.is_empty() {
                    return self.res[k].pop_back();
                }
                if self.buf[a].size > 0 {
                    return self.buf[a].pop(self.w);
                }
                let bg = self.bg.as_mut().unwrap();
                if bg.src.size > bg.size {
                    return bg.src.pop(self.w);
                }
                self.misses.reservoir_starved += 1;
                while self.bg.as_ref().is_some_and(|b| b.stage.is_some()) {
                    self.step();
                }
                self.take()
            }
            Some(bg) => {
                let out = 1 - bg.k;
                if self.res[out].seq.is_empty() {
                    self.step();
                }
                if !self.res[out].seq.is_empty() {
                    return self.res[out].pop_back();
                }
                self.take_idle()
            }
            None => self.take_idle(),
        }
    }

    fn take_idle(&mut self) -> u64 {
        for r in 0..2 {
            if !self.res[r].seq.is_empty() {
                return self.res[r].pop_back();
            }
        }
        self.buf[self.active].pop(self.w)
    }

    /// Some element without removing it, 0 if empty.
    pub fn choice(&self) -> u64 {
        if self.size == 0 {
            return 0;
        }
        for r in &self.res {
            if !r.seq.is_empty() {
                return r.seq.last;
            }
        }
        let a = &self.buf[self.active];
        if a.size > 0 {
            return a.get(a.size - 1, self.w);
        }
        let bg = self.bg.as_ref().expect("elements in transit");
        match bg.stage {
            Some(Stage::Hist2 | Stage::Prefix2 | Stage::Scatter2) => bg.t.get(0) >> 1,
            None => bg.a.get(bg.i) >> 1,
            _ => bg.src.get(0, self.w),
        }
    }

    fn switch(&mut self) {
        let k = self.active;
        let whole = self.buf[k].size;
        let h = self.w.div_ceil(2);
        // Extractions during the sort are served by reservoir k and the
        // active buffer. If the reservoir is short, part of the buffer stays
        // unsorted to cover them; each kept cell saves four sort steps and
        // costs one step to hand back.
        let ms = self.cfg.merge_steps;
        let span = 4 * whole + 2 * (1 << h) + 6;
        let need = span.div_ceil(ms).saturating_sub(1 + self.res[k].seq.count);
        let keep = if need == 0 { 0 } else { ((need * ms).div_ceil(ms + 3) + 1).min(whole) };
        let size = whole - keep;
        self.bg = Some(Background {
            k,
            stage: Some(Stage::Hist1),
            i: 0,
            acc: 0,
            size,
            live0: self.buf[k].live.min(size),
            src: std::mem::take(&mut *self.buf[k]),
            counts: IntVec::new(1 << h, bits_for(size as u64) as usize),
            t: IntVec::new(size, self.w + 1),
            a: IntVec::new(0, 1),
            target: self.res[k].seq.bits(),
            late: false,
        });
        self.all_live = false;
        self.transit_live = self.bg.as_ref().unwrap().live0;
        self.active = 1 - k;
    }

    fn background(&mut self) {
        for _ in 0..self.cfg.merge_steps {
            if self.bg.is_none() {
                break;
            }
            self.step();
        }
        let a = self.active;
        if self.chunk > 0 && self.buf[a].size >= self.sqrt_n {
            let t = self.tables.get_or_insert_with(|| Tables::new(self.chunk));
            for _ in 0..self.cfg.table_steps {
                if t.complete() {
                    break;
                }
                t.step();
            }
        } else if self.bg.is_none() {
            self.tables = None;
        }
    }

    /// One step of the sort or the merge.
    fn step(&mut self) {
        let Some(bg) = self.bg.as_mut() else { return };
        let w = self.w;
        let h = w.div_ceil(2);
        let low = |x: u64| (x & ((1 << h) - 1)) as usize;
        let high = |x: u64| (x >> h) as usize;
        match bg.stage {
            Some(Stage::Hist1) | Some(Stage::Hist2) => {
                if bg.i < bg.size {
                    let key = if bg.stage == Some(Stage::Hist1) { low(bg.src.get(bg.i, w)) } else { high(bg.t.get(bg.i) >> 1) };
                    bg.counts.set(key, bg.counts.get(key) + 1);
                    bg.i += 1;
                } else {
                    bg.stage = Some(if bg.stage == Some(Stage::Hist1) { Stage::Prefix1 } else { Stage::Prefix2 });
                    bg.i = 0;
                    bg.acc = 0;
                }
            }
            Some(Stage::Prefix1) | Some(Stage::Prefix2) => {
                if bg.i < bg.counts.len() {
                    let c = bg.counts.get(bg.i);
                    bg.counts.set(bg.i, bg.acc);
                    bg.acc += c;
                    bg.i += 1;
                } else {
                    bg.stage = Some(if bg.stage == Some(Stage::Prefix1) { Stage::Scatter1 } else { Stage::Scatter2 });
                    bg.i = 0;
                }
            }
            Some(Stage::Scatter1) => {
                if bg.i < bg.size {
                    let x = bg.src.get(bg.i, w);
                    let live = bg.i < bg.live0;
                    let p = bg.counts.get(low(x));
                    bg.counts.set(low(x), p + 1);
                    bg.t.set(p as usize, x << 1 | live as u64);
                    bg.i += 1;
                } else if bg.src.size > bg.size {
                    let live = bg.src.size <= bg.src.live;
                    let x = bg.src.pop(w);
                    bg.target += w as u64;
                    self.buf[self.active].push_keeping(x, live, w);
                } else {
                    bg.src = Buffer::default();
                    bg.counts = IntVec::new(bg.counts.len(), bg.counts.width());
                    bg.a = IntVec::new(bg.size, w + 1);
                    bg.stage = Some(Stage::Hist2);
                    bg.i = 0;
                }
            }
            Some(Stage::Scatter2) => {
                if bg.i < bg.size {
                    let e = bg.t.get(bg.i);
                    let p = bg.counts.get(high(e >> 1));
                    bg.counts.set(high(e >> 1), p + 1);
                    bg.a.set(p as usize, e);
                    bg.i += 1;
                } else {
                    bg.t = IntVec::new(0, 1);
                    bg.counts = IntVec::new(0, 1);
                    bg.stage = None;
                    bg.i = 0;
                }
            }
            None => self.merge_step(),
        }
    }

    fn merge_step(&mut self) {
        let bg = self.bg.as_mut().unwrap();
        let k = bg.k;
        let [r0, r1] = &mut self.res;
        let (inp, out) = if k == 0 { (r0, r1) } else { (r1, r0) };
        let next_buf = (bg.i < bg.size).then(|| bg.a.get(bg.i));
        let xs = next_buf.map_or(u64::MAX, |e| e >> 1);
        if inp.seq.is_empty() && next_buf.is_none() {
            inp.clear();
            self.bg = None;
            return;
        }
        // Runs of dead reservoir codes move a chunk at a time.
        if let Some(t) = self.tables.as_ref().filter(|t| t.complete()) {
            let cw = t.width;
            let seq = &inp.seq;
            if !seq.is_empty() && inp.live_end <= seq.front && seq.front + cw <= seq.buf.len() {
                let chunk = seq.buf.get(seq.front, cw) as usize;
                let mut e = Tables::unpack(t.whole.get(chunk));
                if e.0 > 0 && seq.base + e.2 > xs {
                    let gap = xs - seq.base;
                    e = if gap < 1 << cw { Tables::unpack(t.bounded.get(chunk << cw | gap as usize)) } else { (0, 0, 0) };
                }
                let (cnt, bits, sum) = e;
                if cnt > 0 && (inp.list.is_empty() || inp.list.peek_front() > seq.base + sum) {
                    let (start, base) = (seq.front, seq.base);
                    let x = inp.seq.pop_front();
                    out.seq.push_back(x);
                    if cnt > 1 {
                        let (from, to) = (inp.seq.front, start + bits);
                        let mut p = from;
                        while p < to {
                            let len = (to - p).min(64);
                            out.seq.buf.push(inp.seq.buf.get(p, len), len);
                            p += len;
                        }
                        out.seq.last = base + sum;
                        out.seq.count += cnt - 1;
                        inp.seq.front = to;
                        inp.seq.base = base + sum;
                        inp.seq.count -= cnt - 1;
                    }
                    if inp.seq.is_empty() {
                        inp.clear();
                    }
                    return;
                }
            }
        }
        let from_res = !inp.seq.is_empty() && inp.seq.peek_front() <= xs;
        let (x, live) = if from_res {
            inp.pop_front()
        } else {
            let e = next_buf.unwrap();
            bg.i += 1;
            let live = self.all_live || e & 1 == 1;
            if live {
                self.transit_live -= 1;
            }
            (e >> 1, live)
        };
        out.seq.push_back(x);
        if live {
            out.list.push_back(x);
        }
    }

    /// Starts a robust iteration over the current elements.
    pub fn iter_init(&mut self) {
        for r in &mut self.res {
            r.mark_all_live();
        }
        for b in &mut self.buf {
            b.live = b.size;
        }
        if let Some(bg) = &mut self.bg {
            bg.src.live = bg.src.size;
            self.all_live = true;
            self.transit_live = match bg.stage {
                Some(_) => bg.size,
                None => bg.size - bg.i,
            };
        }
        self.settle();
    }

    fn has_reachable(&self) -> bool {
        self.buf.iter().any(|b| b.live > 0)
            || self.bg.as_ref().is_some_and(|bg| bg.src.live > bg.size)
            || self.res.iter().any(|r| r.has_live())
    }

    /// Whether a live element remains to be enumerated.
    pub fn iter_more(&self) -> bool {
        self.has_reachable() || self.transit_live > 0
    }

    /// Next live element, 0 if none. Live elements caught inside the sort
    /// are reached by running the background process ahead.
    pub fn iter_next(&mut self) -> u64 {
        while !self.has_reachable() {
            if self.transit_live == 0 {
                return 0;
            }
            self.step();
        }
        let x = match self.buf.iter_mut().find(|b| b.live > 0) {
            Some(b) => {
                b.live -= 1;
                b.get(b.live, self.w)
            }
            None => match self.bg.as_mut().filter(|bg| bg.src.live > bg.size) {
                Some(bg) => {
                    bg.src.live -= 1;
                    bg.src.get(bg.src.live, self.w)
                }
                None => self.res.iter_mut().find(|r| r.has_live()).unwrap().enumerate(),
            },
        };
        self.settle();
        x
    }
}

impl SpaceUsage for Pool {
    fn bits_used(&self) -> u64 {
        let mut bits = 64 * 6;
        bits += self.res.iter().map(|r| 64 + r.0.as_ref().map_or(0, |r| r.bits())).sum::<u64>();
        bits += self.buf.iter().map(|b| 64 + b.0.as_ref().map_or(0, |b| b.bits())).sum::<u64>();
        if let Some(bg) = &self.bg {
            bits += bg.src.bits() + bg.counts.bits_used() + bg.t.bits_used() + bg.a.bits_used() + 64 * 6;
        }
        if let Some(t) = &self.tables {
            bits += t.bits();
        }
        bits
    }
}
