//! Searchable prefix sums over `n` nonnegative integers with `b`-bit total
//! and updates bounded by `2^delta` in absolute value.
//!
//! The array is the leaf level of a tree of fixed branching `m`; each node
//! keeps the prefix sums of its `m` child totals in a [`Block`]. A block
//! answers rank queries in constant time by working with a small-valued
//! approximation of its prefix sums, packed `m` fields to at most two
//! words, anchored at a sample of exact prefix sums that is refreshed
//! every `m` updates by a background computation.

use crate::bits::IntVec;
use crate::space::SpaceUsage;
use crate::wordops::mw;
use crate::{ceil_log2, Error, Result};

/// Block geometry shared by all nodes.
#[derive(Clone, Debug)]
struct Geometry {
    m: usize,
    f: usize,
    // Bound on the drift of a prefix sum within two phases.
    h: i128,
    // Offset of stored small vectors.
    a1: u64,
    // Offset of the approximated prefix sums used for ranking.
    a2: u64,
    ones: [u64; 2],
    // a1 in every field: the encoding of an all-zero small vector.
    base: [u64; 2],
    test: [u64; 2],
    // Field i holds i + 1.
    ramp: [u64; 2],
}

type Small = [u64; 2];

impl Geometry {
    fn new(n: usize, delta: u32) -> Result<Self> {
        let m = ((64.0 / delta as f64).sqrt().floor() as usize).min(n).max(2);
        let h = (1i128 << (delta + 1)) * m as i128;
        let need = 12 * m as i128 * h + 1;
        let f = (128 - (need - 1).leading_zeros()) as usize;
        if f > 64 || m * f > 128 {
            return Err(Error::OutOfRange { what: "update bit length", value: delta as u64 });
        }
        let mut g = Geometry { m, f, h, a1: 2 * h as u64, a2: 6 * m as u64 * h as u64, ones: [0; 2], base: [0; 2], test: [0; 2], ramp: [0; 2] };
        for i in 0..m {
            mw::set_bits(&mut g.ones, i * f, f, 1);
            mw::set_bits(&mut g.base, i * f, f, g.a1);
            mw::set_bits(&mut g.test, i * f, f, 1 << (f - 1));
            mw::set_bits(&mut g.ramp, i * f, f, i as u64 + 1);
        }
        Ok(g)
    }

    #[inline]
    fn get(&self, v: &Small, i: usize) -> u64 {
        mw::get_bits(v, i * self.f, self.f)
    }

    #[inline]
    fn set(&self, v: &mut Small, i: usize, x: u64) {
        mw::set_bits(v, i * self.f, self.f, x);
    }

    #[inline]
    fn scale(&self, v: &Small, k: u64) -> Small {
        let mut out = [0u64; 2];
        mw::mul_trunc(v, &[k], &mut out);
        mw::mask(&mut out, self.m * self.f);
        out
    }

    /// Prefix sums of the stored fields, all at once.
    #[inline]
    fn sigma(&self, v: &Small) -> Small {
        let mut out = [0u64; 2];
        mw::mul_trunc(v, &self.ones, &mut out);
        mw::mask(&mut out, self.m * self.f);
        out
    }

    /// Decoded prefix sum of a small vector with offset `a1` up to field
    /// `j` (1-based, `j = 0` gives 0).
    #[inline]
    fn small_prefix(&self, v: &Small, j: usize) -> i128 {
        if j == 0 {
            return 0;
        }
        let s = self.sigma(v);
        self.get(&s, j - 1) as i128 - j as i128 * self.a1 as i128
    }

    /// Number of fields of `x` that are at most `k`.
    #[inline]
    fn rank(&self, x: &Small, k: u64) -> usize {
        let kp = self.scale(&self.ones, k);
        let t = self.test;
        let mut y = [kp[0] | t[0], kp[1] | t[1]];
        let low = [x[0] & !t[0], x[1] & !t[1]];
        mw::sub(&mut y, &low);
        let flags = [
            (kp[0] | y[0]) & ((kp[0] & y[0]) | (x[0] ^ t[0])) & t[0],
            (kp[1] | y[1]) & ((kp[1] & y[1]) | (x[1] ^ t[1])) & t[1],
        ];
        (flags[0].count_ones() + flags[1].count_ones()) as usize
    }
}

const MAX_M: usize = 8;

/// Level storage for the blocks of one tree level, `m` entries per block.
/// Every cell is stored xor its value in the initial state, so all-zero
/// memory is the initial state.
#[derive(Clone, Debug)]
struct Level {
    // A_t.
    cur: IntVec,
    // Two sample prefix-sum vectors per block; the phase parity picks which
    // one is in use and which one is being rebuilt.
    samples: IntVec,
    // Per block: two delta vectors (the completed phase and the running
    // one, by parity) and the clamped copy of A_t, m * f bits each.
    small: Vec<u64>,
    // Updates so far, modulo 2m.
    clock: IntVec,
}

impl Level {
    fn new(blocks: usize, b: u32, g: &Geometry) -> Self {
        let m = g.m;
        Level {
            cur: IntVec::new(blocks * m, b as usize),
            samples: IntVec::new(2 * blocks * m, b as usize),
            small: vec![0; (3 * blocks * m * g.f).div_ceil(64) + 1],
            clock: IntVec::new(blocks, ceil_log2(2 * m as u64) as usize),
        }
    }

    fn get_small(&self, idx: usize, mf: usize) -> Small {
        let pos = idx * mf;
        if mf <= 64 {
            [mw::get_bits(&self.small, pos, mf), 0]
        } else {
            [mw::get_bits(&self.small, pos, 64), mw::get_bits(&self.small, pos + 64, mf - 64)]
        }
    }

    fn set_small(&mut self, idx: usize, mf: usize, v: Small) {
        let pos = idx * mf;
        if mf <= 64 {
            mw::set_bits(&mut self.small, pos, mf, v[0]);
        } else {
            mw::set_bits(&mut self.small, pos, 64, v[0]);
            mw::set_bits(&mut self.small, pos + 64, mf - 64, v[1]);
        }
    }

    fn bits(&self) -> u64 {
        self.cur.bits_used() + self.samples.bits_used() + 64 * self.small.len() as u64 + self.clock.bits_used()
    }
}

/// Decoded copy of one block.
struct Block<'a> {
    g: &'a Geometry,
    cur: [u64; MAX_M],
    sample: [u64; MAX_M],
    done: Small,
    running: Small,
    clamped: Small,
}

impl Block<'_> {
    /// Prefix sum up to position `j` (1-based, 0 allowed).
    fn sum(&self, j: usize) -> u64 {
        if j == 0 {
            return 0;
        }
        let x = self.sample[j - 1] as i128 + self.g.small_prefix(&self.done, j) + self.g.small_prefix(&self.running, j);
        x as u64
    }

    /// `#{j : sum(j) <= x}`.
    fn rank(&self, x: u64) -> usize {
        let g = self.g;
        let m = g.m;
        let sample = &self.sample[..m];
        // The sample entry nearest to x; samples are nondecreasing.
        let r = sample.partition_point(|&v| v <= x);
        let js = if r == 0 {
            1
        } else if r == m || x - sample[r - 1] <= sample[r] - x {
            r
        } else {
            r + 1
        };
        let x0 = sample[js - 1] as i128;
        let drift = g.small_prefix(&self.done, js) + g.small_prefix(&self.running, js);
        let s = g.sigma(&self.clamped);
        let c = g.get(&s, js - 1) as i128 - js as i128 * g.a1 as i128 - drift;
        let lift = g.scale(&g.ones, (g.a2 as i128 - c) as u64);
        let mut approx = lift;
        mw::sub(&mut approx, &g.scale(&g.ramp, g.a1));
        mw::add(&mut approx, &s);
        let y = (x as i128 - x0).clamp(-g.h, g.h);
        if cfg!(debug_assertions) {
            self.check_approximation(&approx, js, x0);
        }
        g.rank(&approx, (y + g.a2 as i128) as u64)
    }

    fn check_approximation(&self, approx: &Small, js: usize, x0: i128) {
        let g = self.g;
        let mut exact = 0i128;
        for j in 1..=g.m {
            exact += self.cur[j - 1] as i128;
            let b = exact - x0;
            let bt = g.get(approx, j - 1) as i128 - g.a2 as i128;
            assert!(bt == b || bt.abs() > g.h, "approximation too coarse at {j}");
            if j == js {
                assert!(b.abs() < g.h, "anchor drifted");
            }
        }
    }
}

/// Prefix sums over `A[1..=n]` supporting `sum`, `search` and `update`.
#[derive(Clone, Debug)]
pub struct SearchablePrefixSums {
    n: usize,
    b: u32,
    delta: u32,
    // Initial contents: A[j] = fill for j < n, A[n] = last.
    fill: u64,
    last: u64,
    g: Geometry,
    // levels[0] holds the array itself, the last level the root block.
    levels: Vec<Level>,
    // m^l for l = 0..=height.
    spans: Vec<usize>,
}

impl SearchablePrefixSums {
    /// `1 <= delta <= b <= 64`; `delta` is further limited so that the
    /// packed approximations fit two words. All entries start at 0.
    pub fn new(n: usize, b: u32, delta: u32) -> Result<Self> {
        Self::with_initial(n, b, delta, 0, 0)
    }

    /// Like [`new`](Self::new), but initially `A[j] = fill` for `j < n` and
    /// `A[n] = last`. Setup time does not depend on the initial values.
    pub fn with_initial(n: usize, b: u32, delta: u32, fill: u64, last: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfRange { what: "length", value: 0 });
        }
        if b == 0 || b > 64 {
            return Err(Error::OutOfRange { what: "sum bit length", value: b as u64 });
        }
        if delta == 0 || delta > b {
            return Err(Error::OutOfRange { what: "update bit length", value: delta as u64 });
        }
        let start = (n as u128 - 1) * fill as u128 + last as u128;
        if start >> b != 0 {
            return Err(Error::Precondition("initial total overflows the sum bit length"));
        }
        let g = Geometry::new(n, delta)?;
        let m = g.m;
        let mut spans = vec![1usize];
        let mut levels = Vec::new();
        loop {
            let span = spans.last().unwrap() * m;
            spans.push(span);
            levels.push(Level::new(n.div_ceil(span), b, &g));
            if span >= n {
                break;
            }
        }
        Ok(SearchablePrefixSums { n, b, delta, fill, last, g, levels, spans })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Branching factor of the tree.
    pub fn branching(&self) -> usize {
        self.g.m
    }

    /// Width of one packed field.
    pub fn field_width(&self) -> usize {
        self.g.f
    }

    pub fn height(&self) -> usize {
        self.levels.len()
    }

    /// Initial total of node `p` (0-based) at `level`.
    #[inline]
    fn initial(&self, level: usize, p: usize) -> u64 {
        let span = self.spans[level];
        let lo = p * span;
        if lo >= self.n {
            return 0;
        }
        let hi = (lo + span).min(self.n);
        let v = (hi - lo) as u64 * self.fill;
        if hi == self.n {
            v - self.fill + self.last
        } else {
            v
        }
    }

    /// Initial entries of block `k` at `level` and their prefix sums.
    fn initial_block(&self, level: usize, k: usize) -> ([u64; MAX_M], [u64; MAX_M]) {
        let mut v = [0u64; MAX_M];
        let mut s = [0u64; MAX_M];
        if self.fill == 0 && self.last == 0 {
            return (v, s);
        }
        let mut acc = 0u64;
        for i in 0..self.g.m {
            v[i] = self.initial(level, k * self.g.m + i);
            acc += v[i];
            s[i] = acc;
        }
        (v, s)
    }

    fn clamp_pattern(&self, init: &[u64; MAX_M]) -> Small {
        let g = &self.g;
        let mut p = [0u64; 2];
        for i in 0..g.m {
            g.set(&mut p, i, init[i].min(g.a1) + g.a1);
        }
        p
    }

    #[inline]
    fn parity(&self, level: usize, k: usize) -> usize {
        (self.levels[level].clock.get(k) as usize / self.g.m) & 1
    }

    fn block(&self, level: usize, k: usize) -> Block<'_> {
        let g = &self.g;
        let (m, mf) = (g.m, g.m * g.f);
        let lv = &self.levels[level];
        let par = self.parity(level, k);
        let (init, isum) = self.initial_block(level, k);
        let mut cur = [0u64; MAX_M];
        let mut sample = [0u64; MAX_M];
        for i in 0..m {
            cur[i] = lv.cur.get(k * m + i) ^ init[i];
            sample[i] = lv.samples.get((2 * k + par) * m + i) ^ isum[i];
        }
        let xor = |a: Small, b: &Small| [a[0] ^ b[0], a[1] ^ b[1]];
        Block {
            g,
            cur,
            sample,
            done: xor(lv.get_small(3 * k + par, mf), &g.base),
            running: xor(lv.get_small(3 * k + 1 - par, mf), &g.base),
            clamped: xor(lv.get_small(3 * k + 2, mf), &self.clamp_pattern(&init)),
        }
    }

    /// Block index and 1-based position of entry `j` (1-based) at `level`.
    #[inline]
    fn locate(&self, level: usize, j: usize) -> (usize, usize) {
        let below = (j - 1) / self.spans[level];
        (below / self.g.m, below % self.g.m + 1)
    }

    pub fn total(&self) -> u64 {
        self.block(self.levels.len() - 1, 0).sum(self.g.m)
    }

    /// `A[1] + ... + A[j]`.
    pub fn sum(&self, j: usize) -> Result<u64> {
        crate::check_range("index", j as u64, 0, self.n as u64)?;
        if j == 0 {
            return Ok(0);
        }
        let mut s = 0u64;
        for level in 0..self.levels.len() {
            let (k, pos) = self.locate(level, j);
            let blk = self.block(level, k);
            s += if level == 0 { blk.sum(pos) } else { blk.sum(pos - 1) };
        }
        Ok(s)
    }

    /// `A[j]`.
    pub fn value(&self, j: usize) -> Result<u64> {
        crate::check_range("index", j as u64, 1, self.n as u64)?;
        Ok(self.levels[0].cur.get(j - 1) ^ self.initial(0, j - 1))
    }

    /// Smallest `j` with `sum(j) >= x`, or `n + 1` if there is none.
    pub fn search(&self, x: u64) -> Result<usize> {
        let max = if self.b == 64 { u64::MAX } else { (1u64 << self.b) - 1 };
        crate::check_range("search key", x, 1, max)?;
        let m = self.g.m;
        let mut rem = x;
        let mut idx = 0usize;
        for level in (0..self.levels.len()).rev() {
            let blk = self.block(level, idx);
            let i = blk.rank(rem - 1) + 1;
            if i > m {
                return Ok(self.n + 1);
            }
            rem -= blk.sum(i - 1);
            idx = idx * m + i - 1;
        }
        Ok(if idx < self.n { idx + 1 } else { self.n + 1 })
    }

    /// `A[j] += d` with `|d| < 2^delta`, keeping `A[j] >= 0` and the total
    /// below `2^b`.
    pub fn update(&mut self, j: usize, d: i64) -> Result<()> {
        crate::check_range("index", j as u64, 1, self.n as u64)?;
        if d.unsigned_abs() >> self.delta != 0 {
            return Err(Error::Precondition("update exceeds the update bit length"));
        }
        let a = self.value(j)? as i128;
        if a + (d as i128) < 0 {
            return Err(Error::Precondition("entry would become negative"));
        }
        if (self.total() as i128 + d as i128) >> self.b != 0 {
            return Err(Error::Precondition("total would overflow the sum bit length"));
        }
        if d == 0 {
            return Ok(());
        }
        for level in 0..self.levels.len() {
            let (k, pos) = self.locate(level, j);
            self.update_block(level, k, pos, d);
        }
        Ok(())
    }

    fn update_block(&mut self, level: usize, k: usize, pos: usize, d: i64) {
        let (m, mf) = (self.g.m, self.g.m * self.g.f);
        let (init, isum) = self.initial_block(level, k);
        let clamp_pat = self.clamp_pattern(&init);
        let g = &self.g;
        let lv = &mut self.levels[level];
        let clock = lv.clock.get(k) as usize;
        let par = (clock / m) & 1;
        let i = pos - 1;
        let cur = (lv.cur.get(k * m + i) ^ init[i]) as i64 + d;
        lv.cur.set(k * m + i, cur as u64 ^ init[i]);
        let mut running = lv.get_small(3 * k + 1 - par, mf);
        let e = g.get(&running, i) ^ g.a1;
        let x = e as i64 + d;
        debug_assert!(x >= 0 && x <= 2 * g.a1 as i64);
        g.set(&mut running, i, x as u64 ^ g.a1);
        lv.set_small(3 * k + 1 - par, mf, running);
        let mut clamped = lv.get_small(3 * k + 2, mf);
        g.set(&mut clamped, i, ((cur as u64).min(g.a1) + g.a1) ^ g.get(&clamp_pat, i));
        lv.set_small(3 * k + 2, mf, clamped);
        // Background rebuild of the next sample: sample + prefix sums of the
        // completed phase's deltas, four entries per update.
        let step = clock % m + 1;
        let (from, to) = ((4 * (step - 1)).min(m), (4 * step).min(m));
        if from < to {
            let done = lv.get_small(3 * k + par, mf);
            let s = g.sigma(&[done[0] ^ g.base[0], done[1] ^ g.base[1]]);
            for i in from..to {
                let base = (lv.samples.get((2 * k + par) * m + i) ^ isum[i]) as i128;
                let v = base + g.get(&s, i) as i128 - (i as i128 + 1) * g.a1 as i128;
                lv.samples.set((2 * k + 1 - par) * m + i, v as u64 ^ isum[i]);
            }
        }
        let next = (clock + 1) % (2 * m);
        lv.clock.set(k, next as u64);
        if next % m == 0 {
            // The completed phase's deltas are folded into the new sample;
            // their slot starts the new running phase.
            lv.set_small(3 * k + par, mf, [0, 0]);
        }
    }
}

impl SpaceUsage for SearchablePrefixSums {
    fn bits_used(&self) -> u64 {
        let levels: u64 = self.levels.iter().map(Level::bits).sum();
        levels + 64 * (self.spans.len() as u64 + 6)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive_search(a: &[u64], x: u64) -> usize {
        let mut s = 0;
        for (i, &v) in a.iter().enumerate() {
            s += v;
            if s >= x {
                return i + 1;
            }
        }
        a.len() + 1
    }

    #[test]
    fn examples() {
        let mut p = SearchablePrefixSums::new(3, 20, 4).unwrap();
        assert!((0..=3).all(|j| p.sum(j).unwrap() == 0));
        assert_eq!(p.search(1).unwrap(), 4);
        p.update(2, 5).unwrap();
        assert_eq!((p.sum(1).unwrap(), p.sum(2).unwrap(), p.sum(3).unwrap()), (0, 5, 5));
        assert_eq!(p.search(3).unwrap(), 2);
        assert_eq!(p.search(5).unwrap(), 2);
        assert_eq!(p.search(6).unwrap(), 4);
        p.update(2, 0).unwrap();
        assert_eq!(p.sum(3).unwrap(), 5);
        p.update(2, -5).unwrap();
        assert_eq!(p.sum(2).unwrap() - p.sum(1).unwrap(), 0);
        assert!(p.update(2, -1).is_err());
        assert!(p.update(1, 16).is_err());
        assert!(p.update(4, 1).is_err());
        assert!(p.search(0).is_err());
        assert!(p.search(1 << 20).is_err());
        let mut q = SearchablePrefixSums::new(4, 4, 3).unwrap();
        for j in 1..=2 {
            q.update(j, 7).unwrap();
        }
        assert!(q.update(3, 2).is_err());
    }

    #[test]
    fn geometry_choices() {
        let cases = [(1u32, 8usize), (4, 4), (7, 3), (8, 2), (17, 2)];
        for (delta, m) in cases {
            let p = SearchablePrefixSums::new(1000, 40, delta).unwrap();
            assert_eq!(p.branching(), m);
            let h = (1u128 << (delta + 1)) * m as u128;
            assert!(1u128 << p.field_width() > 12 * m as u128 * h);
        }
        assert_eq!(SearchablePrefixSums::new(1, 8, 1).unwrap().branching(), 2);
        assert!(SearchablePrefixSums::new(10, 64, 60).is_err());
    }

    fn run_trace(n: usize, b: u32, delta: u32, ops: usize, seed: u64) {
        run_trace_from(n, b, delta, 0, 0, ops, seed)
    }

    fn run_trace_from(n: usize, b: u32, delta: u32, fill: u64, last: u64, ops: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = SearchablePrefixSums::with_initial(n, b, delta, fill, last).unwrap();
        let mut a = vec![fill; n];
        a[n - 1] = last;
        let mut total: u64 = a.iter().sum();
        let lim = (1i64 << delta) - 1;
        let cap = if b == 64 { u64::MAX } else { (1u64 << b) - 1 };
        for _ in 0..ops {
            match rng.gen_range(0..4) {
                0 | 1 => {
                    let j = rng.gen_range(1..=n);
                    let d = rng.gen_range(-lim..=lim);
                    let ok = a[j - 1] as i64 + d >= 0 && (total as i128 + d as i128) <= cap as i128;
                    assert_eq!(p.update(j, d).is_ok(), ok);
                    if ok {
                        a[j - 1] = (a[j - 1] as i64 + d) as u64;
                        total = (total as i64 + d) as u64;
                    }
                }
                2 => {
                    let j = rng.gen_range(0..=n);
                    assert_eq!(p.sum(j).unwrap(), a[..j].iter().sum::<u64>());
                }
                _ => {
                    let x = rng.gen_range(1..=total.saturating_add(2).min(cap));
                    assert_eq!(p.search(x).unwrap(), naive_search(&a, x), "x={x}");
                }
            }
        }
    }

    #[test]
    fn traces_match_naive() {
        run_trace(8, 20, 1, 200_000, 1);
        run_trace(100, 34, 7, 200_000, 2);
        run_trace(1000, 40, 17, 100_000, 3);
        run_trace(5, 8, 3, 100_000, 4);
        run_trace(1, 6, 2, 10_000, 5);
    }

    #[test]
    fn initial_contents() {
        let p = SearchablePrefixSums::with_initial(5, 8, 1, 4, 2).unwrap();
        assert_eq!((1..=5).map(|j| p.sum(j).unwrap()).collect::<Vec<_>>(), vec![4, 8, 12, 16, 18]);
        assert_eq!(p.value(5).unwrap(), 2);
        assert_eq!(p.search(9).unwrap(), 3);
        assert!(SearchablePrefixSums::with_initial(5, 4, 1, 4, 2).is_err());
        run_trace_from(50, 12, 2, 7, 3, 100_000, 6);
        run_trace_from(300, 16, 1, 0, 290, 100_000, 7);
        run_trace_from(1, 10, 3, 9, 9, 10_000, 8);
    }

    #[test]
    fn concentrated_updates_across_phase_boundaries() {
        for delta in [1u32, 3, 7] {
            let n = 16;
            let mut p = SearchablePrefixSums::new(n, 40, delta).unwrap();
            let mut a = vec![0u64; n];
            let big = (1i64 << delta) - 1;
            let m = p.branching();
            for round in 0..40 * m {
                let j = 5;
                let d = if round % 7 < 5 { big } else { -big.min(a[j - 1] as i64) };
                p.update(j, d).unwrap();
                a[j - 1] = (a[j - 1] as i64 + d) as u64;
                let total: u64 = a.iter().sum();
                for x in 1..=total + 1 {
                    assert_eq!(p.search(x).unwrap(), naive_search(&a, x));
                }
                for j in 0..=n {
                    assert_eq!(p.sum(j).unwrap(), a[..j].iter().sum::<u64>());
                }
            }
        }
    }

    #[test]
    fn large_values_far_from_anchor() {
        let mut p = SearchablePrefixSums::new(8, 40, 1).unwrap();
        let mut a = vec![0u64; 8];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20_000 {
            let j = rng.gen_range(1..=8);
            let d = if rng.gen_bool(0.8) { 1 } else { -(a[j - 1].min(1) as i64) };
            p.update(j, d).unwrap();
            a[j - 1] = (a[j - 1] as i64 + d) as u64;
        }
        let total: u64 = a.iter().sum();
        for x in [1, total / 3, total / 2, total, total + 1, 1 << 39] {
            if x >= 1 {
                assert_eq!(p.search(x).unwrap(), naive_search(&a, x));
            }
        }
    }
}
