//! Mixed-radix digit arrays stored within a few bits of the
//! information-theoretic minimum.
//!
//! Consecutive small digits of one base are grouped into big digits of
//! about `2 log n` bits. Every run of equal bases is cut into segments of
//! `2^b` small digits, and the big digits of a segment are the leaves of a
//! binary tree. A node's value is split into low-order bits kept in memory
//! and a *spill* that is handed to the parent, which combines the spills of
//! its two children into its own value. Spills are kept near `2^(b+2)`, so
//! the rounding loss per node is tiny and only the root pays a whole bit.
//! Reading or writing a digit decodes or re-encodes one root-to-leaf path.

use crate::space::SpaceUsage;
use crate::{Error, Result};

/// How a value from `{0, ..., x - 1}` is divided: `m` bits in memory, the
/// rest a spill in `{0, ..., k - 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Split {
    m: usize,
    k: u128,
}

fn split(x: u128, target: u128) -> Split {
    if x <= 2 * target {
        return Split { m: 0, k: x };
    }
    let m = (127 - (x / target).leading_zeros()) as usize;
    Split { m, k: x.div_ceil(1u128 << m) }
}

/// Per-level entries of the split table: all nodes of a level but the last
/// share one split.
#[derive(Clone, Debug)]
struct LevelSpec {
    count: usize,
    full: Split,
    last: Split,
    // Bit offset of the level within a segment.
    offset: usize,
}

impl LevelSpec {
    #[inline]
    fn at(&self, j: usize) -> Split {
        if j + 1 == self.count {
            self.last
        } else {
            self.full
        }
    }
}

/// Layout of one segment: `len` small digits of base `c`, grouped `r` per
/// big digit.
#[derive(Clone, Debug)]
struct Segment {
    len: usize,
    c: u64,
    r: usize,
    pow: Vec<u128>,
    levels: Vec<LevelSpec>,
    bits: usize,
}

impl Segment {
    fn new(len: usize, c: u64, r: usize, target: u128) -> Self {
        let r = r.min(len).max(1);
        let pow: Vec<u128> = (0..=r).map(|i| (c as u128).pow(i as u32)).collect();
        let groups = len.div_ceil(r);
        let tail = len - (groups - 1) * r;
        let leaf = |x: u128| if groups == 1 { Split { m: bits_of(x), k: 1 } } else { split(x, target) };
        let mut levels = vec![LevelSpec { count: groups, full: leaf(pow[r]), last: leaf(pow[tail]), offset: 0 }];
        while levels.last().unwrap().count > 1 {
            let below = levels.last().unwrap();
            let count = below.count.div_ceil(2);
            let x_full = below.full.k * below.full.k;
            let j = count - 1;
            let x_last = if 2 * j + 1 < below.count { below.at(2 * j).k * below.at(2 * j + 1).k } else { below.at(2 * j).k };
            let offset = below.offset + (below.count - 1) * below.full.m + below.last.m;
            let root = count == 1;
            let s = |x: u128| if root { Split { m: bits_of(x), k: 1 } } else { split(x, target) };
            levels.push(LevelSpec { count, full: s(x_full), last: s(x_last), offset });
        }
        let top = levels.last().unwrap();
        let bits = top.offset + (top.count - 1) * top.full.m + top.last.m;
        Segment { len, c, r, pow, levels, bits }
    }

    #[inline]
    fn node_pos(&self, i: usize, j: usize) -> (usize, Split) {
        let lv = &self.levels[i];
        (lv.offset + j * lv.full.m, lv.at(j))
    }

    /// Values of the nodes on the path to big digit `g`, root first, and
    /// the spill of each path node's sibling (if any).
    fn decode_path(&self, mem: &[u64], base: usize, g: usize, path: &mut Vec<(u128, Option<u128>)>) {
        path.clear();
        let top = self.levels.len() - 1;
        let (pos, sp) = self.node_pos(top, 0);
        let mut v = read_bits(mem, base + pos, sp.m);
        path.push((v, None));
        for i in (1..=top).rev() {
            let j = g >> i;
            let child = g >> (i - 1);
            let below = &self.levels[i - 1];
            let (s, sib) = if 2 * j + 1 < below.count {
                let kr = below.at(2 * j + 1).k;
                let (sl, sr) = (v / kr, v % kr);
                if child == 2 * j {
                    (sl, Some(sr))
                } else {
                    (sr, Some(sl))
                }
            } else {
                (v, None)
            };
            let (pos, sp) = self.node_pos(i - 1, child);
            v = (s << sp.m) | read_bits(mem, base + pos, sp.m);
            path.push((v, sib));
        }
    }

    fn read(&self, mem: &[u64], base: usize, idx: usize) -> u64 {
        let mut path = Vec::with_capacity(self.levels.len());
        debug_assert!(idx < self.len);
        let g = idx / self.r;
        self.decode_path(mem, base, g, &mut path);
        let d = path.last().unwrap().0;
        ((d / self.pow[idx % self.r]) % self.c as u128) as u64
    }

    fn write(&self, mem: &mut [u64], base: usize, idx: usize, digit: u64) {
        let mut path = Vec::with_capacity(self.levels.len());
        let g = idx / self.r;
        self.decode_path(mem, base, g, &mut path);
        let p = self.pow[idx % self.r];
        let d = path.last().unwrap().0;
        let old = (d / p) % self.c as u128;
        let mut v = d - old * p + digit as u128 * p;
        // Re-encode bottom-up; sibling spills are unchanged.
        for i in 0..self.levels.len() {
            let j = g >> i;
            let (pos, sp) = self.node_pos(i, j);
            write_bits(mem, base + pos, sp.m, v & ((1u128 << sp.m) - 1));
            if i + 1 == self.levels.len() {
                break;
            }
            let s = v >> sp.m;
            let sib = path[self.levels.len() - 1 - i].1;
            v = match sib {
                None => s,
                Some(o) => {
                    if j % 2 == 0 {
                        s * self.levels[i].at(j + 1).k + o
                    } else {
                        o * sp.k + s
                    }
                }
            };
        }
    }
}

fn bits_of(x: u128) -> usize {
    if x <= 1 {
        0
    } else {
        (128 - (x - 1).leading_zeros()) as usize
    }
}

fn read_bits(mem: &[u64], pos: usize, len: usize) -> u128 {
    let lo = crate::wordops::mw::get_bits(mem, pos, len.min(64)) as u128;
    if len <= 64 {
        lo
    } else {
        lo | (crate::wordops::mw::get_bits(mem, pos + 64, len - 64) as u128) << 64
    }
}

fn write_bits(mem: &mut [u64], pos: usize, len: usize, v: u128) {
    if len == 0 {
        return;
    }
    crate::wordops::mw::set_bits(mem, pos, len.min(64), v as u64);
    if len > 64 {
        crate::wordops::mw::set_bits(mem, pos + 64, len - 64, (v >> 64) as u64);
    }
}

#[derive(Clone, Debug)]
struct Run {
    start: usize,
    count: usize,
    seg_len: usize,
    full: Segment,
    tail: Option<Segment>,
    offset: usize,
}

/// An array `a_1, ..., a_n` with `0 <= a_l < c_l`, where the bases form a
/// few runs of equal values.
#[derive(Clone, Debug)]
pub struct CAryArray {
    n: usize,
    b: u32,
    runs: Vec<Run>,
    mem: Vec<u64>,
    payload: usize,
}

impl CAryArray {
    /// `spec` lists `(base, count)` runs; segments hold `2^b` digits.
    pub fn build(spec: &[(u64, usize)], b: u32) -> Result<Self> {
        if b > 40 {
            return Err(Error::OutOfRange { what: "segment exponent", value: b as u64 });
        }
        let n = spec.iter().try_fold(0usize, |a, &(_, k)| a.checked_add(k)).ok_or(Error::Malformed("length overflow".into()))?;
        let target = 1u128 << (b + 2).min(60);
        let seg_len = 1usize << b;
        let mut runs = Vec::with_capacity(spec.len());
        let (mut start, mut offset) = (0usize, 0usize);
        for &(c, count) in spec {
            if c == 0 || count == 0 {
                return Err(Error::Malformed(format!("run ({c}, {count}) needs base and count >= 1")));
            }
            let r = digits_per_group(c, n);
            let full = Segment::new(seg_len.min(count), c, r, target);
            let rem = count % seg_len;
            let tail = (count > seg_len && rem != 0).then(|| Segment::new(rem, c, r, target));
            let whole = if count > seg_len { count / seg_len } else { 1 };
            runs.push(Run { start, count, seg_len, full, tail, offset });
            offset += whole * runs.last().unwrap().full.bits + runs.last().unwrap().tail.as_ref().map_or(0, |s| s.bits);
            start += count;
        }
        let mem = vec![0u64; offset.div_ceil(64) + 1];
        Ok(CAryArray { n, b, runs, mem, payload: offset })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn segment_exponent(&self) -> u32 {
        self.b
    }

    /// Bits of the encoded digits alone.
    pub fn payload_bits(&self) -> usize {
        self.payload
    }

    /// Bits of the per-level split tables, shared by all segments of a run.
    pub fn table_bits(&self) -> u64 {
        self.runs
            .iter()
            .map(|r| {
                let t = r.tail.as_ref().map_or(0, |s| s.levels.len() + s.pow.len());
                (r.full.levels.len() * 5 + r.full.pow.len() + t * 5) as u64 * 128
            })
            .sum()
    }

    /// Run, tail flag, segment bit offset and index within the segment.
    fn locate(&self, l: usize) -> Result<(usize, bool, usize, usize)> {
        crate::check_range("index", l as u64, 1, self.n as u64)?;
        let i = l - 1;
        let ri = self.runs.iter().rposition(|r| r.start <= i).unwrap();
        let run = &self.runs[ri];
        let off = i - run.start;
        let s = off / run.seg_len;
        let tail = run.tail.is_some() && s == run.count / run.seg_len;
        Ok((ri, tail, run.offset + s * run.full.bits, off % run.seg_len))
    }

    fn segment(runs: &[Run], ri: usize, tail: bool) -> &Segment {
        if tail {
            runs[ri].tail.as_ref().unwrap()
        } else {
            &runs[ri].full
        }
    }

    pub fn base(&self, l: usize) -> Result<u64> {
        let (ri, tail, _, _) = self.locate(l)?;
        Ok(Self::segment(&self.runs, ri, tail).c)
    }

    pub fn read(&self, l: usize) -> Result<u64> {
        let (ri, tail, base, idx) = self.locate(l)?;
        Ok(Self::segment(&self.runs, ri, tail).read(&self.mem, base, idx))
    }

    pub fn write(&mut self, l: usize, v: u64) -> Result<()> {
        let (ri, tail, base, idx) = self.locate(l)?;
        let seg = Self::segment(&self.runs, ri, tail);
        if v >= seg.c {
            return Err(Error::OutOfRange { what: "digit", value: v });
        }
        seg.write(&mut self.mem, base, idx, v);
        Ok(())
    }
}

/// Smallest `r` with `c^r >= n^2`, capped so that big digits stay below
/// `2^100`.
fn digits_per_group(c: u64, n: usize) -> usize {
    if c <= 1 {
        return 1;
    }
    let goal = (n.max(2) as u128).pow(2);
    let mut r = 1;
    let mut x = c as u128;
    while x < goal {
        match x.checked_mul(c as u128) {
            Some(y) if y < 1u128 << 100 => {
                x = y;
                r += 1;
            }
            _ => break,
        }
    }
    r
}

impl SpaceUsage for CAryArray {
    fn bits_used(&self) -> u64 {
        // n, b and (base, count) per run.
        self.payload as u64 + 64 * (2 + 2 * self.runs.len() as u64)
    }
}
