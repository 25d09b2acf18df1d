//! Space-bounded graph algorithms built on the choice dictionaries: random
//! k-permutations, spanning forests and BFS forests consistent with a
//! vertex order, and maximal cliques.
//!
//! Working memory is metered with [`SpaceMeter`]; the input graph and the
//! output stream are not charged.

use crate::bits::BitVec;
use crate::dense::DenseChoiceDict;
use crate::nonsys::NonsysChoiceDict;
use crate::pool::Pool;
use crate::ranksel::ColorWeightIndex;
use crate::space::{SpaceMeter, SpaceUsage};
use crate::traits::{ColorDict, Iterable};
use crate::{Error, Result};
use rand::Rng;
use std::collections::HashSet;

/// A graph over vertices `1..=n` in compressed adjacency form. Directed
/// graphs also carry their in-adjacency.
#[derive(Clone, Debug)]
pub struct Graph {
    n: usize,
    m: usize,
    directed: bool,
    out_off: Vec<usize>,
    out_adj: Vec<u32>,
    in_off: Vec<usize>,
    in_adj: Vec<u32>,
    sorted: bool,
}

fn csr(n: usize, arcs: impl Iterator<Item = (usize, usize)> + Clone) -> (Vec<usize>, Vec<u32>) {
    let mut off = vec![0usize; n + 2];
    for (u, _) in arcs.clone() {
        off[u + 1] += 1;
    }
    for i in 1..off.len() {
        off[i] += off[i - 1];
    }
    let mut adj = vec![0u32; off[n + 1]];
    let mut pos = off.clone();
    for (u, v) in arcs {
        adj[pos[u]] = v as u32;
        pos[u] += 1;
    }
    (off, adj)
}

impl Graph {
    /// Builds the graph from 1-based edges; undirected edges are stored in
    /// both directions.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], directed: bool) -> Result<Self> {
        if n >= u32::MAX as usize {
            return Err(Error::OutOfRange { what: "vertex count", value: n as u64 });
        }
        for &(u, v) in edges {
            for x in [u, v] {
                crate::check_range("vertex", x as u64, 1, n as u64)?;
            }
        }
        let fwd = edges.iter().copied();
        let (out_off, out_adj, in_off, in_adj) = if directed {
            let (a, b) = csr(n, fwd.clone());
            let (c, d) = csr(n, edges.iter().map(|&(u, v)| (v, u)));
            (a, b, c, d)
        } else {
            let both = edges.iter().flat_map(|&(u, v)| [(u, v), (v, u)].into_iter().take(if u == v { 1 } else { 2 }));
            let (a, b) = csr(n, both);
            (a, b, Vec::new(), Vec::new())
        };
        let mut g = Graph { n, m: edges.len(), directed, out_off, out_adj, in_off, in_adj, sorted: false };
        g.sorted = (1..=n).all(|v| g.out(v).windows(2).all(|w| w[0] <= w[1]));
        Ok(g)
    }

    /// Parses `n m d` followed by `m` lines `u v`. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, what: &str| Error::Malformed(format!("line {line}: {what}"));
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| bad(1, "missing header"))?;
        let nums: Vec<&str> = header.split_whitespace().collect();
        if nums.len() != 3 {
            return Err(bad(hl, "header must be `n m d`"));
        }
        let num = |s: &str, line: usize| s.parse::<usize>().map_err(|_| bad(line, &format!("not a number: {s}")));
        let (n, m, d) = (num(nums[0], hl)?, num(nums[1], hl)?, num(nums[2], hl)?);
        if d > 1 {
            return Err(bad(hl, "directed flag must be 0 or 1"));
        }
        let mut edges = Vec::with_capacity(m);
        for (ln, l) in lines {
            let p: Vec<&str> = l.split_whitespace().collect();
            if p.len() != 2 {
                return Err(bad(ln, "edge line must be `u v`"));
            }
            let (u, v) = (num(p[0], ln)?, num(p[1], ln)?);
            if !(1..=n).contains(&u) || !(1..=n).contains(&v) {
                return Err(bad(ln, "vertex out of range"));
            }
            if edges.len() == m {
                return Err(bad(ln, "more edges than announced"));
            }
            edges.push((u, v));
        }
        if edges.len() != m {
            return Err(Error::Malformed(format!("expected {m} edges, found {}", edges.len())));
        }
        Self::from_edges(n, &edges, d == 1)
    }

    /// `G(n, m)`: `m` distinct edges without loops, drawn uniformly.
    pub fn random<R: Rng + ?Sized>(n: usize, m: usize, directed: bool, rng: &mut R) -> Result<Self> {
        let max = if directed { n * n.saturating_sub(1) } else { n * n.saturating_sub(1) / 2 };
        if m > max {
            return Err(Error::OutOfRange { what: "edge count", value: m as u64 });
        }
        let mut seen = HashSet::with_capacity(m);
        let mut edges = Vec::with_capacity(m);
        while edges.len() < m {
            let (u, v) = (rng.gen_range(1..=n), rng.gen_range(1..=n));
            if u == v {
                continue;
            }
            let key = if directed { (u, v) } else { (u.min(v), u.max(v)) };
            if seen.insert(key) {
                edges.push((u, v));
            }
        }
        Self::from_edges(n, &edges, directed)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Every adjacency list is in nondecreasing order.
    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    /// (Out)neighbors of `v`.
    pub fn out(&self, v: usize) -> &[u32] {
        &self.out_adj[self.out_off[v]..self.out_off[v + 1]]
    }

    /// (In)neighbors of `v`.
    pub fn inn(&self, v: usize) -> &[u32] {
        if self.directed {
            &self.in_adj[self.in_off[v]..self.in_off[v + 1]]
        } else {
            self.out(v)
        }
    }
}

/// A vertex order given as a rule, evaluated on demand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    Identity,
    Reverse,
    /// A pseudo-random bijection keyed by the seed.
    Seeded(u64),
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Order {
    /// The `i`-th vertex (`1 <= i <= n`).
    pub fn at(&self, n: usize, i: usize) -> usize {
        match *self {
            Order::Identity => i,
            Order::Reverse => n + 1 - i,
            Order::Seeded(seed) => {
                // Balanced Feistel network on 2h bits with cycle walking.
                let bits = crate::ceil_log2(n as u64).max(2);
                let h = bits.div_ceil(2);
                let mask = (1u64 << h) - 1;
                let mut x = (i - 1) as u64;
                loop {
                    let (mut l, mut r) = (x >> h, x & mask);
                    for round in 0..4u64 {
                        let f = mix(seed ^ mix(r ^ (round << 56))) & mask;
                        (l, r) = (r, l ^ f);
                    }
                    x = l << h | r;
                    if x < n as u64 {
                        return x as usize + 1;
                    }
                }
            }
        }
    }
}

/// One output triple, extended by a depth for BFS forests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ForestRecord {
    /// 0 for a root.
    pub parent: usize,
    pub vertex: usize,
    pub tree: usize,
    pub depth: Option<usize>,
}

/// Working memory and work counters of one run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub peak_bits: u64,
    pub sweeps: usize,
}

/// Scalars kept by every algorithm (counters, loop positions, the order
/// rule).
const SCALARS: u64 = 64 * 8;

/// Emits a uniformly random sequence of `k` distinct elements of
/// `{1, ..., n}`.
pub fn random_k_permutation<R: Rng + ?Sized>(n: usize, k: usize, t: u32, rng: &mut R, mut emit: impl FnMut(usize)) -> Result<Report> {
    if n == 0 {
        return Err(Error::OutOfRange { what: "n", value: 0 });
    }
    crate::check_range("k", k as u64, 1, n as u64)?;
    let mut d = ColorWeightIndex::new(n, 2, t)?;
    let mut meter = SpaceMeter::new();
    meter.record("scalars", SCALARS);
    meter.record("set", d.bits_used());
    for _ in 0..k {
        let x = d.uniform_choice(0, rng)?;
        emit(x);
        d.setcolor(1, x)?;
        meter.record("set", d.bits_used());
    }
    Ok(Report { peak_bits: meter.peak(), sweeps: 0 })
}

/// Pool capacity for [`spanning_forest`].
pub fn pool_cap(n: usize, t: usize) -> usize {
    let t = t.max(1) as f64;
    let div = 16.0 * t * (t + 1.0).log2() + 8.0;
    ((n as f64 / div).ceil() as usize).max(1)
}

struct Sweeper<'a, F: FnMut(ForestRecord)> {
    g: &'a Graph,
    visited: BitVec,
    pool: Pool,
    cap: usize,
    k: usize,
    meter: SpaceMeter,
    emit: F,
}

impl<F: FnMut(ForestRecord)> Sweeper<'_, F> {
    fn add(&mut self, v: usize) -> bool {
        self.pool.insert(v as u64).expect("vertex in range");
        self.meter.record("pool", self.pool.bits_used());
        self.pool.len() as usize >= self.cap
    }

    /// Visits the unvisited (out)neighbors of `u`; false if the pool filled
    /// up on the way.
    fn process(&mut self, u: usize) -> bool {
        for &v in self.g.out(u) {
            let v = v as usize;
            if !self.visited.get(v - 1) {
                self.visited.set(v - 1, true);
                (self.emit)(ForestRecord { parent: u, vertex: v, tree: self.k, depth: None });
                if self.add(v) {
                    return false;
                }
            }
        }
        true
    }

    fn sweep(&mut self) -> usize {
        let mut sweeps = 0;
        loop {
            sweeps += 1;
            self.pool = Pool::new(self.g.n as u64).expect("universe size");
            self.meter.record("pool", self.pool.bits_used());
            if (1..=self.g.n).all(|x| !self.visited.get(x - 1) || self.process(x)) {
                return sweeps;
            }
        }
    }
}

/// Emits a spanning forest consistent with `order` in top-down order using
/// an `n`-bit visited vector and a pool of at most [`pool_cap`] vertices.
pub fn spanning_forest(g: &Graph, order: Order, t: usize, emit: impl FnMut(ForestRecord)) -> Result<Report> {
    let n = g.n;
    if n == 0 {
        return Ok(Report::default());
    }
    let mut s = Sweeper {
        g,
        visited: BitVec::new(n),
        pool: Pool::new(n as u64)?,
        cap: pool_cap(n, t),
        k: 0,
        meter: SpaceMeter::new(),
        emit,
    };
    s.meter.record("scalars", SCALARS);
    s.meter.record("visited", s.visited.bits_used());
    s.meter.record("pool", s.pool.bits_used());
    let mut sweeps = 0;
    for i in 1..=n {
        let r = order.at(n, i);
        if s.visited.get(r - 1) {
            continue;
        }
        s.k += 1;
        s.visited.set(r - 1, true);
        (s.emit)(ForestRecord { parent: 0, vertex: r, tree: s.k, depth: None });
        let mut full = s.add(r);
        loop {
            if full {
                sweeps += s.sweep();
            }
            let u = s.pool.extract_choice() as usize;
            s.meter.record("pool", s.pool.bits_used());
            if u == 0 {
                break;
            }
            full = !s.process(u);
        }
    }
    Ok(Report { peak_bits: s.meter.peak(), sweeps })
}

/// Backend for the three-color dictionaries of [`bfs_forest`] and
/// [`maximal_clique`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ColorBackend {
    /// Four-color nonsystematic dictionary with trees of height `t`.
    #[default]
    Nonsys,
    /// Three-color dense dictionary.
    Dense,
}

trait Store: Iterable + SpaceUsage {}
impl<T: Iterable + SpaceUsage> Store for T {}

fn store(backend: ColorBackend, n: usize, t: usize) -> Result<Box<dyn Store>> {
    Ok(match backend {
        ColorBackend::Nonsys => Box::new(NonsysChoiceDict::new(n, 4, t)?),
        ColorBackend::Dense => Box::new(DenseChoiceDict::new(n, 3)),
    })
}

const WHITE: usize = 0;
const GRAY: usize = 1;
const BLACK: usize = 2;

/// Emits a shortest-path spanning forest consistent with `order`, with
/// depths, by rounds over the gray vertices.
pub fn bfs_forest(g: &Graph, order: Order, t: usize, backend: ColorBackend, mut emit: impl FnMut(ForestRecord)) -> Result<Report> {
    let n = g.n;
    if n == 0 {
        return Ok(Report::default());
    }
    let mut col = store(backend, n, t)?;
    let mut meter = SpaceMeter::new();
    meter.record("scalars", SCALARS);
    meter.record("colors", col.bits_used());
    // Debug-only instrumentation, not part of the working memory.
    #[cfg(debug_assertions)]
    let mut gray_rounds = vec![0u8; n + 1];
    let mut k = 0;
    for i in 1..=n {
        let r = order.at(n, i);
        if col.color(r)? != WHITE {
            continue;
        }
        k += 1;
        col.setcolor(GRAY, r)?;
        emit(ForestRecord { parent: 0, vertex: r, tree: k, depth: Some(0) });
        let mut d = 0;
        while col.size(GRAY)? > 0 {
            col.iter_init(GRAY)?;
            loop {
                let u = col.iter_next(GRAY)?;
                if u == 0 {
                    break;
                }
                let mut frontier = u == r;
                if !frontier {
                    for &x in g.inn(u) {
                        if col.color(x as usize)? == BLACK {
                            frontier = true;
                            break;
                        }
                    }
                }
                if frontier {
                    for &v in g.out(u) {
                        let v = v as usize;
                        if col.color(v)? == WHITE {
                            col.setcolor(GRAY, v)?;
                            emit(ForestRecord { parent: u, vertex: v, tree: k, depth: Some(d + 1) });
                        }
                    }
                }
            }
            col.iter_init(GRAY)?;
            loop {
                let u = col.iter_next(GRAY)?;
                if u == 0 {
                    break;
                }
                #[cfg(debug_assertions)]
                {
                    gray_rounds[u] += 1;
                    assert!(gray_rounds[u] <= 2, "vertex {u} gray in three rounds");
                }
                let mut done = true;
                for &v in g.out(u) {
                    if col.color(v as usize)? == WHITE {
                        done = false;
                        break;
                    }
                }
                if done {
                    col.setcolor(BLACK, u)?;
                }
            }
            meter.record("colors", col.bits_used());
            d += 1;
        }
    }
    Ok(Report { peak_bits: meter.peak(), sweeps: 0 })
}

/// Emits the vertices of a maximal clique grown greedily from vertex 1.
/// With sorted adjacency lists, a bit vector holds the candidates while
/// they are many and a two-color dictionary afterwards.
pub fn maximal_clique(g: &Graph, t: usize, backend: ColorBackend, emit: impl FnMut(usize)) -> Result<Report> {
    if g.directed {
        return Err(Error::Precondition("maximal clique needs an undirected graph"));
    }
    if g.n == 0 {
        return Ok(Report::default());
    }
    if g.sorted {
        clique_sorted(g, t, emit)
    } else {
        clique_colors(g, t, backend, emit)
    }
}

fn clique_colors(g: &Graph, t: usize, backend: ColorBackend, mut emit: impl FnMut(usize)) -> Result<Report> {
    let mut col = store(backend, g.n, t)?;
    let mut meter = SpaceMeter::new();
    meter.record("scalars", SCALARS);
    meter.record("colors", col.bits_used());
    emit(1);
    for &v in g.out(1) {
        if v != 1 {
            col.setcolor(1, v as usize)?;
        }
    }
    loop {
        let u = col.choice(1)?;
        if u == 0 {
            break;
        }
        emit(u);
        col.setcolor(0, u)?;
        for &v in g.out(u) {
            if col.color(v as usize)? == 1 {
                col.setcolor(2, v as usize)?;
            }
        }
        for (from, to) in [(1, 0), (2, 1)] {
            loop {
                let x = col.choice(from)?;
                if x == 0 {
                    break;
                }
                col.setcolor(to, x)?;
            }
        }
        meter.record("colors", col.bits_used());
    }
    Ok(Report { peak_bits: meter.peak(), sweeps: 0 })
}

fn clear_range(b: &mut BitVec, lo: usize, hi: usize) {
    // Clears bits lo..hi (0-based, half-open).
    let w = b.words_mut();
    let mut i = lo;
    while i < hi {
        if i % 64 == 0 && hi - i >= 64 {
            w[i / 64] = 0;
            i += 64;
        } else {
            w[i / 64] &= !(1u64 << (i % 64));
            i += 1;
        }
    }
}

fn clique_sorted(g: &Graph, t: usize, mut emit: impl FnMut(usize)) -> Result<Report> {
    let n = g.n;
    let mut meter = SpaceMeter::new();
    meter.record("scalars", SCALARS);
    emit(1);
    let mut w = BitVec::new(n);
    for &v in g.out(1) {
        if v != 1 {
            w.set(v as usize - 1, true);
        }
    }
    meter.record("candidates", w.bits_used());
    let mut size = w.count_ones();
    let small = n.div_ceil(64).max(1);
    while size >= small {
        let (i, word) = w.words().iter().enumerate().find(|(_, &x)| x != 0).unwrap();
        let u = i * 64 + word.trailing_zeros() as usize + 1;
        emit(u);
        w.set(u - 1, false);
        let mut prev = 0;
        for &v in g.out(u) {
            let v = v as usize;
            if v > prev {
                clear_range(&mut w, prev, v - 1);
                prev = v;
            }
        }
        clear_range(&mut w, prev, n);
        size = w.count_ones();
    }
    if size == 0 {
        return Ok(Report { peak_bits: meter.peak(), sweeps: 0 });
    }
    // Few candidates left: move them through a pool into a dictionary.
    let mut staged = Pool::new(n as u64)?;
    for (i, &word) in w.words().iter().enumerate() {
        let mut x = word;
        while x != 0 {
            staged.insert((i * 64 + x.trailing_zeros() as usize + 1) as u64)?;
            x &= x - 1;
        }
    }
    meter.record("pool", staged.bits_used());
    drop(w);
    meter.release("candidates");
    let mut d = NonsysChoiceDict::new(n, 2, t)?;
    meter.record("candidates", d.bits_used());
    loop {
        let x = staged.extract_choice() as usize;
        if x == 0 {
            break;
        }
        d.setcolor(1, x)?;
    }
    loop {
        let u = d.choice(1)?;
        if u == 0 {
            break;
        }
        emit(u);
        d.setcolor(0, u)?;
        let mut keep = Pool::new(n as u64)?;
        for &v in g.out(u) {
            if d.color(v as usize)? == 1 {
                keep.insert(v as u64)?;
            }
        }
        meter.record("pool", keep.bits_used());
        loop {
            let x = d.choice(1)?;
            if x == 0 {
                break;
            }
            d.setcolor(0, x)?;
        }
        loop {
            let x = keep.extract_choice() as usize;
            if x == 0 {
                break;
            }
            d.setcolor(1, x)?;
        }
        meter.record("candidates", d.bits_used());
    }
    Ok(Report { peak_bits: meter.peak(), sweeps: 0 })
}
