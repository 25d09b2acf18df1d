//! Nonsystematic choice dictionaries for `c = 2^f` colors.
//!
//! The universe is cut into leaves of `w'` digits, each leaf held in one
//! simulated leaf word of `W` bits. Leaves hang off complete `d`-ary trees
//! of height `t`. A leaf that misses some color can be rewritten in a
//! compact form that frees `c d t` bits; those bits carry the navigation
//! vectors of one light path, so no per-node memory beyond the leaf words
//! and two bits per tree is needed. Two-color systematic dictionaries over
//! the trees answer which tree holds a given color.
//!
//! Spectra are `c`-bit masks: bit `j` set means color `j` occurs below the
//! node. A full node (every leaf holds every color) is written as 0 and an
//! empty node (only color 0) as 1.

use crate::atomic::{AtomicChoiceDict, FieldScanner};
use crate::bits::{garbage_words, IntVec};
use crate::space::{word_bits, SpaceUsage};
use crate::traits::{ColorDict, Iterable, Successor};
use crate::trie::{Side, SystematicChoiceDict};
use crate::wordops::mw;
use crate::{Error, Result};

const FULL: u32 = 0;
const EMPTY: u32 = 1;

/// Root bit values.
const ROOT_LIGHT: u64 = 0;
const ROOT_FULL: u64 = 1;
const ROOT_EMPTY: u64 = 2;

/// Shape of the leaf words and of the trees above them.
#[derive(Clone, Debug)]
pub struct Geometry {
    c: usize,
    f: usize,
    d: usize,
    t: usize,
    bits: usize,
    limbs: usize,
    digits: usize,
    /// Digits per big group (`2c^2`).
    group: usize,
    /// Big groups per leaf.
    groups: usize,
    /// Bits per small group (`cf`).
    sg: usize,
    pow: Vec<u64>,
    dpow: Vec<usize>,
    cmask: u32,
    scan: FieldScanner,
}

impl Geometry {
    /// `c` must be a power of two in `2..=16`; for other color counts use
    /// the dense or trie dictionaries.
    pub fn new(c: usize, t: usize) -> Result<Self> {
        if !(2..=16).contains(&c) || !c.is_power_of_two() {
            return Err(Error::Precondition("color count must be a power of two in 2..=16"));
        }
        if !(1..=16).contains(&t) {
            return Err(Error::OutOfRange { what: "tree height", value: t as u64 });
        }
        let f = c.trailing_zeros() as usize;
        let unit = c * c * f * t;
        // Round the word length up so that the degree is an integer >= 2.
        let d = 2.max(64usize.div_ceil(unit));
        let bits = 2 * d * unit;
        let dpow: Vec<usize> = (0..=t as u32).map(|h| d.pow(h)).collect();
        if dpow[t] > 1 << 24 {
            return Err(Error::OutOfRange { what: "tree height", value: t as u64 });
        }
        let pow = (0..c as u32).map(|i| (c as u64 - 1).pow(i)).collect();
        Ok(Geometry {
            c,
            f,
            d,
            t,
            bits,
            limbs: bits.div_ceil(64),
            digits: bits / f,
            group: 2 * c * c,
            groups: bits / (2 * c * c * f),
            sg: c * f,
            pow,
            dpow,
            cmask: ((1u64 << c) - 1) as u32,
            scan: FieldScanner::new(f),
        })
    }

    pub fn colors(&self) -> usize {
        self.c
    }
    pub fn degree(&self) -> usize {
        self.d
    }
    pub fn height(&self) -> usize {
        self.t
    }
    /// Bits per leaf word.
    pub fn word_bits(&self) -> usize {
        self.bits
    }
    /// Digits per leaf.
    pub fn digits(&self) -> usize {
        self.digits
    }
    /// Leaves in a complete tree.
    pub fn leaves(&self) -> usize {
        self.dpow[self.t]
    }
    /// Free bits of a compact leaf.
    pub fn payload_bits(&self) -> usize {
        self.c * self.d * self.t
    }
    pub fn big_groups(&self) -> usize {
        self.groups
    }

    // ---- standard form ----

    fn std_get(&self, w: &[u64], m: usize) -> usize {
        mw::get_bits(w, m * self.f, self.f) as usize
    }

    fn std_set(&self, w: &mut [u64], m: usize, j: usize) {
        mw::set_bits(w, m * self.f, self.f, j as u64);
    }

    fn std_next(&self, w: &[u64], j: usize, from: usize) -> Option<usize> {
        self.scan.next_eq(w, from, self.digits, j as u64)
    }

    fn std_present(&self, w: &[u64]) -> u32 {
        (0..self.c).filter(|&j| self.std_next(w, j, 0).is_some()).fold(0, |m, j| m | 1 << j)
    }

    // ---- j̄-free form ----

    fn sg_pos(&self, g: usize, s: usize) -> usize {
        g * self.group * self.f + s * self.sg
    }

    fn sum_pos(&self, g: usize, a: usize) -> usize {
        self.sg_pos(g, 2 * a + 1)
    }

    fn sg_value(&self, w: &[u64], g: usize, s: usize) -> u64 {
        mw::get_bits(w, self.sg_pos(g, s) + 1, self.sg - 1)
    }

    fn base(&self) -> u64 {
        self.c as u64 - 1
    }

    fn cmp_get(&self, w: &[u64], jb: usize, m: usize) -> usize {
        let (g, r) = (m / self.group, m % self.group);
        let v = self.sg_value(w, g, r / self.c);
        unskip(jb, ((v / self.pow[r % self.c]) % self.base()) as usize)
    }

    fn group_has(&self, w: &[u64], g: usize, a: usize) -> bool {
        (0..2 * self.c).any(|s| {
            let mut v = self.sg_value(w, g, s);
            (0..self.c).any(|_| {
                let x = v % self.base();
                v /= self.base();
                x as usize == a
            })
        })
    }

    fn cmp_set(&self, w: &mut [u64], jb: usize, m: usize, j: usize) -> Result<()> {
        if j == jb {
            return Err(Error::Precondition("compact leaf cannot take its missing color"));
        }
        let (g, r) = (m / self.group, m % self.group);
        let (s, i) = (r / self.c, r % self.c);
        let v = self.sg_value(w, g, s);
        let old = ((v / self.pow[i]) % self.base()) as usize;
        let new = skip(jb, j);
        if old == new {
            return Ok(());
        }
        let v = v - old as u64 * self.pow[i] + new as u64 * self.pow[i];
        mw::set_bits(w, self.sg_pos(g, s) + 1, self.sg - 1, v);
        mw::set_bits(w, self.sum_pos(g, new), 1, 1);
        if !self.group_has(w, g, old) {
            mw::set_bits(w, self.sum_pos(g, old), 1, 0);
        }
        Ok(())
    }

    fn cmp_next(&self, w: &[u64], jb: usize, j: usize, from: usize) -> Option<usize> {
        if j == jb || from >= self.digits {
            return None;
        }
        let a = skip(jb, j) as u64;
        for g in from / self.group..self.groups {
            if mw::get_bits(w, self.sum_pos(g, a as usize), 1) == 0 {
                continue;
            }
            let lo = from.max(g * self.group);
            for s in (lo - g * self.group) / self.c..2 * self.c {
                let mut v = self.sg_value(w, g, s);
                for i in 0..self.c {
                    let idx = g * self.group + s * self.c + i;
                    if idx >= lo && v % self.base() == a {
                        return Some(idx);
                    }
                    v /= self.base();
                }
            }
        }
        None
    }

    fn cmp_present(&self, w: &[u64], jb: usize) -> u32 {
        let mut m = 0;
        for g in 0..self.groups {
            for a in 0..self.c - 1 {
                if mw::get_bits(w, self.sum_pos(g, a), 1) == 1 {
                    m |= 1 << unskip(jb, a);
                }
            }
        }
        m
    }

    fn pay_get(&self, w: &[u64], q: usize) -> bool {
        mw::get_bits(w, 2 * self.sg * q, 1) == 1
    }

    fn pay_set(&self, w: &mut [u64], q: usize, b: bool) {
        mw::set_bits(w, 2 * self.sg * q, 1, b as u64);
    }

    /// Navigation vector slot `s` of the payload (the root uses slot 0).
    fn slot_get(&self, w: &[u64], s: usize) -> u64 {
        let cd = self.c * self.d;
        (0..cd).fold(0, |acc, b| acc | (self.pay_get(w, s * cd + b) as u64) << b)
    }

    fn slot_set(&self, w: &mut [u64], s: usize, nav: u64) {
        let cd = self.c * self.d;
        for b in 0..cd {
            self.pay_set(w, s * cd + b, nav >> b & 1 == 1);
        }
    }

    /// Standard `src` to compact `out`; the payload bits of `out` are zero.
    fn to_jfree(&self, src: &[u64], jb: usize, out: &mut [u64], yc: &mut Yc) -> Result<()> {
        out.fill(0);
        let blk = yc.block();
        let vb = self.sg - 1;
        for g in 0..self.groups {
            let mut present = 0u32;
            for s0 in (0..2 * self.c).step_by(blk) {
                let mut key = 0u64;
                for s in s0..s0 + blk {
                    for i in 0..self.c {
                        let x = self.std_get(src, g * self.group + s * self.c + i);
                        if x == jb {
                            return Err(Error::Precondition("leaf holds the color to be dropped"));
                        }
                        let a = skip(jb, x);
                        present |= 1 << a;
                        key |= (a as u64) << (((s - s0) * self.c + i) * self.f);
                    }
                }
                let val = yc.pack(self, key);
                for s in s0..s0 + blk {
                    mw::set_bits(out, self.sg_pos(g, s) + 1, vb, val >> ((s - s0) * vb) & low(vb));
                }
            }
            for a in 0..self.c - 1 {
                if present >> a & 1 == 1 {
                    mw::set_bits(out, self.sum_pos(g, a), 1, 1);
                }
            }
        }
        Ok(())
    }

    fn to_standard(&self, src: &[u64], jb: usize, out: &mut [u64], yc: &mut Yc) {
        out.fill(0);
        let blk = yc.block();
        let vb = self.sg - 1;
        for g in 0..self.groups {
            for s0 in (0..2 * self.c).step_by(blk) {
                let mut val = 0u64;
                for s in s0..s0 + blk {
                    val |= self.sg_value(src, g, s) << ((s - s0) * vb);
                }
                let key = yc.unpack(self, val);
                for s in s0..s0 + blk {
                    for i in 0..self.c {
                        let a = (key >> (((s - s0) * self.c + i) * self.f)) & low(self.f);
                        self.std_set(out, g * self.group + s * self.c + i, unskip(jb, a as usize));
                    }
                }
            }
        }
    }

    fn pack_block(&self, key: u64, blk: usize) -> u64 {
        let vb = self.sg - 1;
        let mut val = 0;
        for s in 0..blk {
            let v: u64 = (0..self.c).map(|i| (key >> ((s * self.c + i) * self.f) & low(self.f)) * self.pow[i]).sum();
            val |= v << (s * vb);
        }
        val
    }

    fn unpack_block(&self, val: u64, blk: usize) -> u64 {
        let vb = self.sg - 1;
        let mut key = 0;
        for s in 0..blk {
            let mut v = val >> (s * vb) & low(vb);
            for i in 0..self.c {
                key |= (v % self.base()) << ((s * self.c + i) * self.f);
                v /= self.base();
            }
        }
        key
    }

    // ---- tree shape ----

    fn count(&self, nl: usize, ht: usize) -> usize {
        nl.div_ceil(self.dpow[ht])
    }

    fn deg(&self, nl: usize, ht: usize, k: usize) -> usize {
        self.d.min(self.count(nl, ht - 1) - (k - 1) * self.d)
    }

    fn leftmost(&self, ht: usize, k: usize) -> usize {
        (k - 1) * self.dpow[ht] + 1
    }

    /// Index of the child of the height-`ht` ancestor of leaf `i` on the
    /// way to `i`.
    fn pidx(&self, i: usize, ht: usize) -> usize {
        ((i - 1) / self.dpow[ht - 1]) % self.d
    }

    fn spec_at(&self, nav: u64, x: usize) -> u32 {
        (nav >> (x * self.c)) as u32 & self.cmask
    }

    fn with_spec(&self, nav: u64, x: usize, s: u32) -> u64 {
        let m = (self.cmask as u64) << (x * self.c);
        (nav & !m) | (s as u64) << (x * self.c)
    }

    fn empty_nav(&self, deg: usize) -> u64 {
        (0..deg).fold(0, |n, x| n | 1 << (x * self.c))
    }

    fn combine(&self, nav: u64, deg: usize) -> u32 {
        let mut all_full = true;
        let mut m = 0;
        for x in 0..deg {
            let s = self.spec_at(nav, x);
            if s == FULL {
                m |= self.cmask;
            } else {
                all_full = false;
                m |= s;
            }
        }
        if all_full {
            FULL
        } else {
            m
        }
    }

    /// Leftmost light child, else leftmost empty child.
    fn pref(&self, nav: u64, deg: usize) -> Option<usize> {
        (0..deg)
            .find(|&x| is_light(self.spec_at(nav, x)))
            .or_else(|| (0..deg).find(|&x| self.spec_at(nav, x) == EMPTY))
    }

    fn has(&self, s: u32, j: usize) -> bool {
        s == FULL || s >> j & 1 == 1
    }

    fn leaf_spec(&self, present: u32) -> u32 {
        if present == self.cmask {
            FULL
        } else {
            present
        }
    }

    fn child(&self, nl: usize, u: &Info, nav: u64, x: usize) -> Info {
        let ht = u.ht - 1;
        let k = (u.k - 1) * self.d + x + 1;
        let spec = self.spec_at(nav, x);
        let is_pref = u.spec != FULL && self.pref(nav, self.deg(nl, u.ht, u.k)) == Some(x);
        let mut v = Info { ht, k, spec, inq: false, top: false, src: u.src };
        if is_light(spec) {
            if ht > 0 {
                v.inq = true;
                v.top = !is_pref;
                if v.top {
                    v.src = self.leftmost(ht, k);
                }
            } else {
                v.inq = is_pref;
            }
        } else if spec == EMPTY {
            v.inq = u.inq && is_pref;
        }
        v
    }
}

fn low(b: usize) -> u64 {
    if b >= 64 {
        !0
    } else {
        (1u64 << b) - 1
    }
}

fn skip(jb: usize, j: usize) -> usize {
    j - (j > jb) as usize
}

fn unskip(jb: usize, a: usize) -> usize {
    a + (a >= jb) as usize
}

fn is_light(s: u32) -> bool {
    s != FULL && s != EMPTY
}

/// Smallest color missing from a deficient spectrum.
fn missing(s: u32) -> usize {
    debug_assert!(s != FULL);
    (!s).trailing_zeros() as usize
}

/// Lazily filled conversion table between blocks of skip-transformed digits
/// (one `f`-bit field each) and their packed base-`(c-1)` form.
#[derive(Clone, Debug)]
struct Yc {
    blk: usize,
    kbits: usize,
    vbits: usize,
    tables: Option<(IntVec, IntVec)>,
}

impl Yc {
    const MAX_KEY_BITS: usize = 20;

    fn new(g: &Geometry) -> Self {
        let blk = g.c / 4;
        let kbits = blk * g.sg;
        if blk == 0 || kbits > Self::MAX_KEY_BITS {
            return Self::off();
        }
        Yc { blk, kbits, vbits: blk * (g.sg - 1), tables: None }
    }

    fn off() -> Self {
        Yc { blk: 0, kbits: 0, vbits: 0, tables: None }
    }

    fn block(&self) -> usize {
        self.blk.max(1)
    }

    fn enabled(&self) -> bool {
        self.blk > 0
    }

    fn tables(&mut self) -> &mut (IntVec, IntVec) {
        let (kb, vb) = (self.kbits, self.vbits);
        self.tables.get_or_insert_with(|| (IntVec::new(1 << kb, vb + 1), IntVec::new(1 << vb, kb + 1)))
    }

    fn pack(&mut self, g: &Geometry, key: u64) -> u64 {
        if !self.enabled() {
            return g.pack_block(key, 1);
        }
        let (blk, vb) = (self.blk, self.vbits);
        let fwd = &mut self.tables().0;
        let e = fwd.get(key as usize);
        if e >> vb == 1 {
            return e & low(vb);
        }
        let v = g.pack_block(key, blk);
        fwd.set(key as usize, v | 1 << vb);
        v
    }

    fn unpack(&mut self, g: &Geometry, val: u64) -> u64 {
        if !self.enabled() {
            return g.unpack_block(val, 1);
        }
        let (blk, kb) = (self.blk, self.kbits);
        let back = &mut self.tables().1;
        let e = back.get(val as usize);
        if e >> kb == 1 {
            return e & low(kb);
        }
        let k = g.unpack_block(val, blk);
        back.set(val as usize, k | 1 << kb);
        k
    }

    fn filled(&self) -> usize {
        match &self.tables {
            None => 0,
            Some((a, b)) => {
                let (kb, vb) = (self.kbits, self.vbits);
                (0..a.len()).filter(|&i| a.get(i) >> vb == 1).count() + (0..b.len()).filter(|&i| b.get(i) >> kb == 1).count()
            }
        }
    }
}

impl SpaceUsage for Yc {
    fn bits_used(&self) -> u64 {
        self.tables.as_ref().map_or(0, |(a, b)| a.bits_used() + b.bits_used())
    }
}

/// Representation of a [`LeafDict`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Form {
    Standard,
    /// Compact form for a leaf without the given color.
    JFree(usize),
}

/// One leaf word on its own: `w'` digits of `f` bits in standard form, or
/// the compact form without one color whose free bits carry a payload.
#[derive(Clone, Debug)]
pub struct LeafDict {
    g: Geometry,
    words: Vec<u64>,
    form: Form,
    yc: Yc,
}

impl LeafDict {
    pub fn new(c: usize, t: usize) -> Result<Self> {
        let g = Geometry::new(c, t)?;
        let yc = Yc::new(&g);
        Ok(LeafDict { words: vec![0; g.limbs], g, form: Form::Standard, yc })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.g
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    fn check_m(&self, m: usize) -> Result<()> {
        crate::check_range("digit", m as u64, 1, self.g.digits as u64)
    }

    fn check_j(&self, j: usize) -> Result<()> {
        crate::check_range("color", j as u64, 0, self.g.c as u64 - 1)
    }

    pub fn color(&self, m: usize) -> Result<usize> {
        self.check_m(m)?;
        Ok(match self.form {
            Form::Standard => self.g.std_get(&self.words, m - 1),
            Form::JFree(jb) => self.g.cmp_get(&self.words, jb, m - 1),
        })
    }

    pub fn setcolor(&mut self, j: usize, m: usize) -> Result<()> {
        self.check_j(j)?;
        self.check_m(m)?;
        match self.form {
            Form::Standard => self.g.std_set(&mut self.words, m - 1, j),
            Form::JFree(jb) => self.g.cmp_set(&mut self.words, jb, m - 1, j)?,
        }
        Ok(())
    }

    /// Smallest digit position above `m` (`0 <= m <= w'`) holding `j`, or 0.
    pub fn successor(&self, j: usize, m: usize) -> Result<usize> {
        self.check_j(j)?;
        crate::check_range("digit", m as u64, 0, self.g.digits as u64)?;
        let r = match self.form {
            Form::Standard => self.g.std_next(&self.words, j, m),
            Form::JFree(jb) => self.g.cmp_next(&self.words, jb, j, m),
        };
        Ok(r.map_or(0, |x| x + 1))
    }

    /// Colors present, as a bit mask.
    pub fn present(&self) -> u32 {
        match self.form {
            Form::Standard => self.g.std_present(&self.words),
            Form::JFree(jb) => self.g.cmp_present(&self.words, jb),
        }
    }

    /// Summary bit of big group `g` for color `j` (compact form only).
    pub fn summary(&self, g: usize, j: usize) -> Option<bool> {
        match self.form {
            Form::JFree(jb) if j != jb && g < self.g.groups => {
                Some(mw::get_bits(&self.words, self.g.sum_pos(g, skip(jb, j)), 1) == 1)
            }
            _ => None,
        }
    }

    /// Converts to the compact form without color `jb`; the payload starts
    /// out zero.
    pub fn to_jfree(&mut self, jb: usize) -> Result<()> {
        self.check_j(jb)?;
        let mut std = vec![0; self.g.limbs];
        match self.form {
            Form::Standard => std.copy_from_slice(&self.words),
            Form::JFree(old) => self.g.to_standard(&self.words, old, &mut std, &mut self.yc),
        }
        let mut out = vec![0; self.g.limbs];
        self.g.to_jfree(&std, jb, &mut out, &mut self.yc)?;
        self.words = out;
        self.form = Form::JFree(jb);
        Ok(())
    }

    /// Converts back to standard form; the payload is dropped.
    pub fn to_standard(&mut self) {
        if let Form::JFree(jb) = self.form {
            let mut out = vec![0; self.g.limbs];
            self.g.to_standard(&self.words, jb, &mut out, &mut self.yc);
            self.words = out;
            self.form = Form::Standard;
        }
    }

    pub fn payload(&self, q: usize) -> Result<bool> {
        self.check_payload(q)?;
        Ok(self.g.pay_get(&self.words, q))
    }

    pub fn set_payload(&mut self, q: usize, b: bool) -> Result<()> {
        self.check_payload(q)?;
        self.g.pay_set(&mut self.words, q, b);
        Ok(())
    }

    fn check_payload(&self, q: usize) -> Result<()> {
        if !matches!(self.form, Form::JFree(_)) {
            return Err(Error::Precondition("standard leaves carry no payload"));
        }
        crate::check_range("payload bit", q as u64, 0, self.g.payload_bits() as u64 - 1)
    }
}

/// Navigation state of one node during a descent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Info {
    ht: usize,
    k: usize,
    spec: u32,
    /// On a light path.
    inq: bool,
    top: bool,
    /// Leaf whose word holds the history of this node's light path.
    src: usize,
}

/// Where leaf `i`'s digits live and how.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Resolved {
    /// Index of the leaf word holding the digits.
    pub pi: usize,
    pub spectrum: u32,
    /// Stored compactly together with a history.
    pub proxy: bool,
}

/// Read access to one tree.
struct View<'a> {
    g: &'a Geometry,
    nl: usize,
    h: &'a [u64],
    root: u64,
}

impl View<'_> {
    fn word(&self, x: usize) -> &[u64] {
        &self.h[(x - 1) * self.g.limbs..x * self.g.limbs]
    }

    fn root_info(&self) -> Info {
        let g = self.g;
        let spec = match self.root {
            ROOT_FULL => FULL,
            ROOT_EMPTY => EMPTY,
            _ => g.combine(g.slot_get(self.word(1), 0), g.deg(self.nl, g.t, 1)),
        };
        root_info(g, spec)
    }

    fn nav(&self, v: &Info) -> u64 {
        let g = self.g;
        match v.spec {
            FULL => 0,
            EMPTY => g.empty_nav(g.deg(self.nl, v.ht, v.k)),
            _ => g.slot_get(self.word(v.src), g.t - v.ht),
        }
    }

    /// Infos and navigation vectors of the ancestors of leaf `i`, indexed
    /// by height.
    fn path(&self, i: usize) -> (Vec<Info>, Vec<u64>) {
        let g = self.g;
        let mut infos = vec![self.root_info(); g.t + 1];
        let mut navs = vec![0; g.t + 1];
        for ht in (1..=g.t).rev() {
            navs[ht] = self.nav(&infos[ht]);
            infos[ht - 1] = g.child(self.nl, &infos[ht], navs[ht], g.pidx(i, ht));
        }
        (infos, navs)
    }

    fn proxy_of(&self, mut v: Info) -> usize {
        let g = self.g;
        while v.ht > 0 {
            let nav = self.nav(&v);
            let x = g.pref(nav, g.deg(self.nl, v.ht, v.k)).expect("deficient node");
            v = g.child(self.nl, &v, nav, x);
        }
        v.k
    }

    fn resolve(&self, i: usize) -> Resolved {
        let g = self.g;
        let (infos, _) = self.path(i);
        let leaf = infos[0];
        let mut last_hist = 0;
        let mut switch = None;
        for ht in (1..=g.t).rev() {
            let u = &infos[ht];
            if u.top {
                last_hist = g.leftmost(ht, u.k);
                if last_hist == i {
                    switch = Some(*u);
                    break;
                }
            }
        }
        let pi = match switch {
            Some(u) => self.proxy_of(u),
            None if leaf.inq => last_hist,
            None => i,
        };
        Resolved { pi, spectrum: leaf.spec, proxy: leaf.inq }
    }

    /// Digits of leaf `x` in standard form.
    fn read_leaf(&self, r: &Resolved, out: &mut [u64], yc: &mut Yc) {
        if r.proxy {
            self.g.to_standard(self.word(r.pi), missing(r.spectrum), out, yc);
        } else if r.spectrum == EMPTY {
            out.fill(0);
        } else {
            out.copy_from_slice(self.word(r.pi));
        }
    }

    fn leaf_next(&self, r: &Resolved, j: usize, from: usize) -> Option<usize> {
        let g = self.g;
        if from >= g.digits || !g.has(r.spectrum, j) {
            return None;
        }
        if r.spectrum == EMPTY {
            return Some(from);
        }
        if r.proxy {
            g.cmp_next(self.word(r.pi), missing(r.spectrum), j, from)
        } else {
            g.std_next(self.word(r.pi), j, from)
        }
    }

    fn color(&self, l0: usize) -> usize {
        let g = self.g;
        let (i, m) = (l0 / g.digits + 1, l0 % g.digits);
        let r = self.resolve(i);
        if r.spectrum == EMPTY {
            0
        } else if r.proxy {
            g.cmp_get(self.word(r.pi), missing(r.spectrum), m)
        } else {
            g.std_get(self.word(r.pi), m)
        }
    }

    /// Smallest local position `>= from` (0-based) with color `j`.
    fn next(&self, j: usize, from: usize) -> Option<usize> {
        let g = self.g;
        if from >= self.nl * g.digits {
            return None;
        }
        let (i, m) = (from / g.digits + 1, from % g.digits);
        let r = self.resolve(i);
        if let Some(x) = self.leaf_next(&r, j, m) {
            return Some((i - 1) * g.digits + x);
        }
        // Deepest right sibling of the path to i whose subtree holds j.
        let (infos, navs) = self.path(i);
        let mut found = None;
        for ht in 1..=g.t {
            let deg = g.deg(self.nl, ht, infos[ht].k);
            if let Some(x) = (g.pidx(i, ht) + 1..deg).find(|&x| g.has(g.spec_at(navs[ht], x), j)) {
                found = Some(g.child(self.nl, &infos[ht], navs[ht], x));
                break;
            }
        }
        let mut v = found?;
        while v.ht > 0 {
            let nav = self.nav(&v);
            let deg = g.deg(self.nl, v.ht, v.k);
            let x = (0..deg).find(|&x| g.has(g.spec_at(nav, x), j)).expect("color below node");
            v = g.child(self.nl, &v, nav, x);
        }
        let r = self.resolve(v.k);
        let x = self.leaf_next(&r, j, 0).expect("color in leaf");
        Some((v.k - 1) * g.digits + x)
    }
}

fn root_info(g: &Geometry, spec: u32) -> Info {
    let light = is_light(spec);
    Info { ht: g.t, k: 1, spec, inq: light, top: light, src: 1 }
}

fn root_bits(spec: u32) -> u64 {
    match spec {
        FULL => ROOT_FULL,
        EMPTY => ROOT_EMPTY,
        _ => ROOT_LIGHT,
    }
}

/// A light path after an update: its top, historian, proxy and history.
struct NewPath {
    top: (usize, usize),
    hist: usize,
    proxy: usize,
    /// `(height, navigation vector, on the updated leaf's path)`.
    navs: Vec<(usize, u64, bool)>,
}

/// Effect of one tree update: old color and root spectra before and after.
struct Change {
    old: usize,
    before: u32,
    after: u32,
}

/// `setcolor(j, l0 + 1)` on one tree. All leaf words are read before any
/// is written.
fn tree_setcolor(g: &Geometry, nl: usize, h: &mut [u64], root: &mut u64, yc: &mut Yc, j: usize, l0: usize) -> Change {
    let (i, m) = (l0 / g.digits + 1, l0 % g.digits);
    let lim = g.limbs;
    let view = View { g, nl, h: &*h, root: *root };
    let (pinfo, pnav) = view.path(i);
    let before = pinfo[g.t].spec;
    let ri = view.resolve(i);
    let mut di = vec![0; lim];
    view.read_leaf(&ri, &mut di, yc);
    let old = g.std_get(&di, m);
    if old == j {
        return Change { old, before, after: before };
    }
    g.std_set(&mut di, m, j);
    let spec_i = g.leaf_spec(g.std_present(&di));
    if spec_i == ri.spectrum {
        // No spectrum changes anywhere: edit the leaf in place.
        let w = &mut h[(ri.pi - 1) * lim..ri.pi * lim];
        if ri.proxy {
            g.cmp_set(w, missing(spec_i), m, j).expect("present color");
        } else {
            g.std_set(w, m, j);
        }
        return Change { old, before, after: before };
    }

    // Navigation vectors and infos along the path after the update.
    let mut nnav = pnav.clone();
    let mut s = spec_i;
    for ht in 1..=g.t {
        nnav[ht] = g.with_spec(pnav[ht], g.pidx(i, ht), s);
        s = g.combine(nnav[ht], g.deg(nl, ht, pinfo[ht].k));
    }
    let after = s;
    let mut ninfo = pinfo.clone();
    ninfo[g.t] = root_info(g, after);
    for ht in (1..=g.t).rev() {
        ninfo[ht - 1] = g.child(nl, &ninfo[ht], nnav[ht], g.pidx(i, ht));
    }

    // Tops whose light path may differ: those on the path, and siblings
    // whose parent changed its preferred child.
    let mut old_tops: Vec<Info> = Vec::new();
    let mut new_tops: Vec<(Info, bool)> = Vec::new();
    for ht in 1..=g.t {
        if pinfo[ht].top {
            old_tops.push(pinfo[ht]);
        }
        if ninfo[ht].top {
            new_tops.push((ninfo[ht], true));
        }
        if ht >= 2 {
            let deg = g.deg(nl, ht, pinfo[ht].k);
            let op = if pinfo[ht].spec != FULL { g.pref(pnav[ht], deg) } else { None };
            let np = if ninfo[ht].spec != FULL { g.pref(nnav[ht], deg) } else { None };
            let mut xs = [op, np];
            if op == np {
                xs[1] = None;
            }
            for x in xs.into_iter().flatten().filter(|&x| x != g.pidx(i, ht)) {
                let yo = g.child(nl, &pinfo[ht], pnav[ht], x);
                let yn = g.child(nl, &ninfo[ht], nnav[ht], x);
                if yo.top != yn.top {
                    if yo.top {
                        old_tops.push(yo);
                    } else {
                        // Its navigation vectors are still stored where the
                        // old path put them.
                        new_tops.push((Info { src: yo.src, ..yn }, false));
                    }
                }
            }
        }
    }

    let old_pairs: Vec<((usize, usize), usize, usize)> =
        old_tops.iter().map(|u| ((u.ht, u.k), g.leftmost(u.ht, u.k), view.proxy_of(*u))).collect();
    let new_paths: Vec<NewPath> = new_tops
        .iter()
        .map(|&(u, on_p)| {
            let mut v = u;
            let mut on_p = on_p;
            let mut navs = Vec::new();
            while v.ht > 0 {
                let nav = if on_p { nnav[v.ht] } else { view.nav(&v) };
                navs.push((v.ht, nav, on_p));
                let x = g.pref(nav, g.deg(nl, v.ht, v.k)).expect("deficient node");
                let mut next = g.child(nl, &v, nav, x);
                if on_p && x != g.pidx(i, v.ht) {
                    on_p = false;
                    next.src = g.child(nl, &pinfo[v.ht], pnav[v.ht], x).src;
                }
                v = next;
            }
            NewPath { top: (u.ht, u.k), hist: g.leftmost(u.ht, u.k), proxy: v.k, navs }
        })
        .collect();

    let unchanged =
        |p: &NewPath| p.proxy != i && old_pairs.iter().any(|&(top, hh, pp)| top == p.top && hh == p.hist && pp == p.proxy);
    let mut touched: Vec<usize> = vec![i];
    for &(top, hh, pp) in &old_pairs {
        if !new_paths.iter().any(|p| p.top == top && unchanged(p)) {
            touched.extend([hh, pp]);
        }
    }
    let mut patches: Vec<(usize, usize, u64)> = Vec::new();
    for p in &new_paths {
        if unchanged(p) {
            patches.extend(p.navs.iter().filter(|e| e.2).map(|&(ht, nav, _)| (p.hist, ht, nav)));
        } else {
            touched.extend([p.hist, p.proxy]);
        }
    }
    touched.sort_unstable();
    touched.dedup();

    let mut writes: Vec<(usize, Vec<u64>)> = Vec::with_capacity(touched.len());
    for &x in &touched {
        let (dx, spec) = if x == i {
            (di.clone(), spec_i)
        } else {
            let r = view.resolve(x);
            let mut dx = vec![0; lim];
            view.read_leaf(&r, &mut dx, yc);
            (dx, r.spectrum)
        };
        let role = new_paths.iter().find(|p| p.hist == x || p.proxy == x);
        let word = match role {
            Some(p) if p.proxy == x => {
                let mut w = vec![0; lim];
                g.to_jfree(&dx, missing(spec), &mut w, yc).expect("proxy misses a color");
                for &(ht, nav, _) in &p.navs {
                    g.slot_set(&mut w, g.t - ht, nav);
                }
                (p.hist, w)
            }
            Some(p) => (p.proxy, dx),
            None => (x, dx),
        };
        writes.push(word);
    }
    debug_assert!({
        let mut t: Vec<usize> = writes.iter().map(|w| w.0).collect();
        t.sort_unstable();
        t.dedup();
        t.len() == writes.len()
    });

    *root = root_bits(after);
    for (hh, ht, nav) in patches {
        g.slot_set(&mut h[(hh - 1) * lim..hh * lim], g.t - ht, nav);
    }
    for (target, w) in writes {
        h[(target - 1) * lim..target * lim].copy_from_slice(&w);
    }
    Change { old, before, after }
}

/// Checks the stored form of one tree against its true colors (`shadow`,
/// one entry per element of the tree). Returns the number of light paths.
fn audit_tree(g: &Geometry, nl: usize, h: &[u64], root: u64, shadow: &[usize]) -> std::result::Result<usize, String> {
    let view = View { g, nl, h, root };
    let w = g.digits;
    // spec[ht][k - 1]
    let mut spec: Vec<Vec<u32>> = vec![Vec::new(); g.t + 1];
    spec[0] = (0..nl).map(|x| g.leaf_spec(shadow[x * w..(x + 1) * w].iter().fold(0, |m, &c| m | 1 << c))).collect();
    let mut navs: Vec<Vec<u64>> = vec![Vec::new(); g.t + 1];
    for ht in 1..=g.t {
        for k in 1..=g.count(nl, ht) {
            let deg = g.deg(nl, ht, k);
            let nav = (0..deg).fold(0, |n, x| g.with_spec(n, x, spec[ht - 1][(k - 1) * g.d + x]));
            navs[ht].push(nav);
            spec[ht].push(g.combine(nav, deg));
        }
    }
    let rs = spec[g.t][0];
    if root != root_bits(rs) {
        return Err(format!("root bits {root} for spectrum {rs:b}"));
    }
    // Closure: the parent of a light node is light.
    for ht in 0..g.t {
        for (k0, &s) in spec[ht].iter().enumerate() {
            if is_light(s) && !is_light(spec[ht + 1][k0 / g.d]) {
                return Err(format!("light node ({ht},{}) under non-light parent", k0 + 1));
            }
        }
    }
    let pref = |ht: usize, k: usize| g.pref(navs[ht][k - 1], g.deg(nl, ht, k));
    // Tops: light root; light inner nodes that are not preferred.
    let mut tops = Vec::new();
    if is_light(rs) {
        tops.push((g.t, 1));
    }
    for ht in 1..g.t {
        for k in 1..=g.count(nl, ht) {
            let pk = (k - 1) / g.d + 1;
            if is_light(spec[ht][k - 1]) && pref(ht + 1, pk) != Some((k - 1) % g.d) {
                tops.push((ht, k));
            }
        }
    }
    let mut pi: Vec<usize> = (0..=nl).collect();
    let mut is_proxy = vec![false; nl + 1];
    let mut role = vec![0u8; nl + 1];
    let mut pairs = Vec::new();
    let mut hists = Vec::new();
    for &(ht0, k0) in &tops {
        let (mut ht, mut k) = (ht0, k0);
        let mut hist = Vec::new();
        while ht > 0 {
            hist.push((ht, navs[ht][k - 1]));
            let x = pref(ht, k).ok_or("top path reaches a full node")?;
            k = (k - 1) * g.d + x + 1;
            ht -= 1;
        }
        let hh = g.leftmost(ht0, k0);
        if role[hh] != 0 || (role[k] != 0 && k != hh) {
            return Err(format!("leaf {hh} or {k} has two roles"));
        }
        role[hh] |= 1;
        role[k] |= 2;
        pi[hh] = k;
        pi[k] = hh;
        is_proxy[k] = true;
        pairs.push((hh, k));
        hists.push(hist);
    }
    for &(hh, p) in &pairs {
        if hh > p {
            return Err(format!("historian {hh} right of proxy {p}"));
        }
        if (hh + 1..p).any(|x| role[x] != 0) {
            return Err(format!("role strictly between historian {hh} and proxy {p}"));
        }
    }
    let mut yc = Yc::off();
    let mut buf = vec![0; g.limbs];
    for x in 1..=nl {
        let r = view.resolve(x);
        let want = Resolved { pi: pi[x], spectrum: spec[0][x - 1], proxy: is_proxy[x] };
        if r != want {
            return Err(format!("resolve({x}) = {r:?}, expected {want:?}"));
        }
        if r.spectrum == EMPTY && !r.proxy {
            continue;
        }
        view.read_leaf(&r, &mut buf, &mut yc);
        for mm in 0..w {
            if g.std_get(&buf, mm) != shadow[(x - 1) * w + mm] {
                return Err(format!("leaf {x} digit {mm} differs"));
            }
        }
        if r.proxy {
            let wd = view.word(r.pi);
            let jb = missing(r.spectrum);
            if g.cmp_present(wd, jb) != r.spectrum & g.cmask {
                return Err(format!("summary bits of proxy {x}"));
            }
            let (n, _) = pairs.iter().enumerate().find(|(_, p)| p.1 == x).unwrap();
            for &(ht, nav) in &hists[n] {
                if g.slot_get(wd, g.t - ht) != nav {
                    return Err(format!("history of proxy {x} at height {ht}"));
                }
            }
        }
    }
    Ok(pairs.len())
}

/// One tree of `N` (or fewer) leaves on its own.
#[derive(Clone, Debug)]
pub struct SmallTreeDict {
    g: Geometry,
    nl: usize,
    h: Vec<u64>,
    root: u64,
    yc: Yc,
}

impl SmallTreeDict {
    pub fn new(c: usize, t: usize) -> Result<Self> {
        let g = Geometry::new(c, t)?;
        let n = g.leaves();
        Self::with_leaves(c, t, n)
    }

    /// A tree with only the first `leaves` leaves of the complete tree.
    pub fn with_leaves(c: usize, t: usize, leaves: usize) -> Result<Self> {
        let g = Geometry::new(c, t)?;
        crate::check_range("leaves", leaves as u64, 1, g.leaves() as u64)?;
        let yc = Yc::new(&g);
        Ok(SmallTreeDict { h: vec![0; leaves * g.limbs], g, nl: leaves, root: ROOT_EMPTY, yc })
    }

    /// Like [`with_leaves`](Self::with_leaves) with arbitrary initial leaf
    /// words.
    pub fn with_garbage(c: usize, t: usize, leaves: usize, seed: u64) -> Result<Self> {
        let mut s = Self::with_leaves(c, t, leaves)?;
        s.h = garbage_words(s.h.len(), seed);
        Ok(s)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.g
    }

    pub fn universe(&self) -> usize {
        self.nl * self.g.digits
    }

    fn view(&self) -> View<'_> {
        View { g: &self.g, nl: self.nl, h: &self.h, root: self.root }
    }

    fn check_l(&self, l: usize) -> Result<()> {
        crate::check_range("element", l as u64, 1, self.universe() as u64)
    }

    fn check_j(&self, j: usize) -> Result<()> {
        crate::check_range("color", j as u64, 0, self.g.c as u64 - 1)
    }

    pub fn color(&self, l: usize) -> Result<usize> {
        self.check_l(l)?;
        Ok(self.view().color(l - 1))
    }

    pub fn setcolor(&mut self, j: usize, l: usize) -> Result<()> {
        self.check_j(j)?;
        self.check_l(l)?;
        tree_setcolor(&self.g, self.nl, &mut self.h, &mut self.root, &mut self.yc, j, l - 1);
        Ok(())
    }

    /// Smallest element of color `j` above `l` (`0 <= l <= universe`), or 0.
    pub fn successor(&self, j: usize, l: usize) -> Result<usize> {
        self.check_j(j)?;
        crate::check_range("element", l as u64, 0, self.universe() as u64)?;
        Ok(self.view().next(j, l).map_or(0, |x| x + 1))
    }

    pub fn resolve(&self, i: usize) -> Result<Resolved> {
        crate::check_range("leaf", i as u64, 1, self.nl as u64)?;
        Ok(self.view().resolve(i))
    }

    /// Verifies the storage invariant against the true colors, indexed by
    /// element minus one. Returns the number of light paths.
    pub fn audit(&self, colors: &[usize]) -> std::result::Result<usize, String> {
        if colors.len() != self.universe() {
            return Err("shadow length".into());
        }
        audit_tree(&self.g, self.nl, &self.h, self.root, colors)
    }
}

/// Iteration position for one color.
#[derive(Clone, Copy, Debug)]
enum Walk {
    /// Inside tree `cur` (0: none yet) from local position `from`.
    Trees { cur: usize, from: usize },
    Tail { last: usize },
}

/// Trees of [`SmallTreeDict`]s over the universe, a packed tail for the
/// elements past the last whole leaf, and per-color tree indexes.
#[derive(Clone, Debug)]
pub struct NonsysChoiceDict {
    n: usize,
    c: usize,
    g: Option<Geometry>,
    leaves: usize,
    trees: usize,
    h: Vec<u64>,
    roots: IntVec,
    /// Trees whose words have been set up.
    init: Option<SystematicChoiceDict>,
    /// Slot 0: trees lacking color 0; slot `j > 0`: trees holding `j`.
    has: Vec<SystematicChoiceDict>,
    tail: AtomicChoiceDict,
    counts: Vec<usize>,
    yc: Yc,
    walks: Vec<Walk>,
}

impl NonsysChoiceDict {
    /// `c` must be a power of two up to 16; `t >= 1` is the tree height.
    pub fn new(n: usize, c: usize, t: usize) -> Result<Self> {
        if c == 0 || !c.is_power_of_two() || c > 16 {
            return Err(Error::Precondition(
                "color count must be a power of two up to 16; use the dense or trie dictionaries otherwise",
            ));
        }
        if c == 1 {
            let mut counts = vec![0; 1];
            counts[0] = n;
            return Ok(NonsysChoiceDict {
                n,
                c,
                g: None,
                leaves: 0,
                trees: 0,
                h: Vec::new(),
                roots: IntVec::new(0, 2),
                init: None,
                has: Vec::new(),
                tail: AtomicChoiceDict::new(0, 1),
                counts,
                yc: Yc::off(),
                walks: vec![Walk::Tail { last: 0 }],
            });
        }
        let g = Geometry::new(c, t)?;
        let leaves = n / g.digits;
        let trees = leaves.div_ceil(g.leaves());
        let tt = t as u32;
        let mut counts = vec![0; c];
        counts[0] = n;
        Ok(NonsysChoiceDict {
            n,
            c,
            leaves,
            trees,
            h: vec![0; leaves * g.limbs],
            roots: IntVec::new(trees, 2),
            init: (trees > 0).then(|| SystematicChoiceDict::new(trees, tt)),
            has: if trees > 0 { (0..c).map(|_| SystematicChoiceDict::new(trees, tt)).collect() } else { Vec::new() },
            tail: AtomicChoiceDict::new(n - leaves * g.digits, c),
            counts,
            yc: Yc::new(&g),
            walks: vec![Walk::Tail { last: 0 }; c],
            g: Some(g),
        })
    }

    /// Like [`new`](Self::new) with arbitrary initial leaf words and root
    /// bits.
    pub fn with_garbage(n: usize, c: usize, t: usize, seed: u64) -> Result<Self> {
        let mut d = Self::new(n, c, t)?;
        d.h = garbage_words(d.h.len(), seed);
        d.roots.fill_garbage(seed ^ 0x5eed);
        Ok(d)
    }

    pub fn geometry(&self) -> Option<&Geometry> {
        self.g.as_ref()
    }

    /// Number of filled entries in the conversion table.
    pub fn table_entries(&self) -> usize {
        self.yc.filled()
    }

    fn check_l(&self, l: usize) -> Result<()> {
        crate::check_range("element", l as u64, 1, self.n as u64)
    }

    fn check_j(&self, j: usize) -> Result<()> {
        crate::check_range("color", j as u64, 0, self.c as u64 - 1)
    }

    fn span(&self) -> usize {
        let g = self.g.as_ref().unwrap();
        g.leaves() * g.digits
    }

    fn tree_leaves(&self, k: usize) -> usize {
        let g = self.g.as_ref().unwrap();
        g.leaves().min(self.leaves - (k - 1) * g.leaves())
    }

    fn is_init(&self, k: usize) -> bool {
        self.init.as_ref().is_some_and(|d| d.leaf(k))
    }

    fn tree_view(&self, k: usize) -> View<'_> {
        let g = self.g.as_ref().unwrap();
        let first = (k - 1) * g.leaves() * g.limbs;
        let nl = self.tree_leaves(k);
        View { g, nl, h: &self.h[first..first + nl * g.limbs], root: self.roots.get(k - 1) }
    }

    fn tree_next(&self, k: usize, j: usize, from: usize) -> Option<usize> {
        if self.is_init(k) {
            self.tree_view(k).next(j, from)
        } else {
            let size = self.tree_leaves(k) * self.g.as_ref().unwrap().digits;
            (j == 0 && from < size).then_some(from)
        }
    }

    fn side(j: usize) -> Side {
        if j == 0 {
            Side::Complement
        } else {
            Side::Set
        }
    }

    fn tail_start(&self) -> usize {
        self.g.as_ref().map_or(0, |g| self.leaves * g.digits)
    }

    /// Verifies every tree and index against the true colors, indexed by
    /// element minus one. Returns the number of light paths.
    pub fn audit(&self, colors: &[usize]) -> std::result::Result<usize, String> {
        if colors.len() != self.n {
            return Err("shadow length".into());
        }
        for j in 0..self.c {
            let cnt = colors.iter().filter(|&&x| x == j).count();
            if cnt != self.counts[j] {
                return Err(format!("count of color {j}"));
            }
        }
        let Some(g) = &self.g else { return Ok(0) };
        let span = self.span();
        let mut paths = 0;
        for k in 1..=self.trees {
            let lo = (k - 1) * span;
            let nl = self.tree_leaves(k);
            let part = &colors[lo..lo + nl * g.digits];
            let mask = part.iter().fold(0u32, |m, &x| m | 1 << x);
            if self.is_init(k) {
                let v = self.tree_view(k);
                paths += audit_tree(g, nl, v.h, v.root, part).map_err(|e| format!("tree {k}: {e}"))?;
            } else if mask != 1 {
                return Err(format!("uninitialized tree {k} holds colors {mask:b}"));
            }
            for j in 0..self.c {
                let stored = self.has[j].leaf(k) != (j == 0);
                if stored != (mask >> j & 1 == 1) {
                    return Err(format!("index of color {j} wrong for tree {k}"));
                }
            }
        }
        let ts = self.tail_start();
        for (x, &want) in colors[ts..].iter().enumerate() {
            if self.tail.color(x + 1).unwrap() != want {
                return Err(format!("tail element {}", ts + x + 1));
            }
        }
        Ok(paths)
    }
}

impl ColorDict for NonsysChoiceDict {
    fn universe(&self) -> usize {
        self.n
    }

    fn num_colors(&self) -> usize {
        self.c
    }

    fn color(&self, l: usize) -> Result<usize> {
        self.check_l(l)?;
        if self.c == 1 {
            return Ok(0);
        }
        let ts = self.tail_start();
        if l > ts {
            return self.tail.color(l - ts);
        }
        let span = self.span();
        let k = (l - 1) / span + 1;
        if !self.is_init(k) {
            return Ok(0);
        }
        Ok(self.tree_view(k).color((l - 1) % span))
    }

    fn setcolor(&mut self, j: usize, l: usize) -> Result<()> {
        self.check_j(j)?;
        self.check_l(l)?;
        if self.c == 1 {
            return Ok(());
        }
        let ts = self.tail_start();
        if l > ts {
            let old = self.tail.color(l - ts)?;
            self.tail.setcolor(j, l - ts)?;
            self.counts[old] -= 1;
            self.counts[j] += 1;
            return Ok(());
        }
        let span = self.span();
        let k = (l - 1) / span + 1;
        if !self.is_init(k) {
            if j == 0 {
                return Ok(());
            }
            self.roots.set(k - 1, ROOT_EMPTY);
            self.init.as_mut().unwrap().put(k, true);
        }
        let nl = self.tree_leaves(k);
        let g = self.g.as_ref().unwrap();
        let first = (k - 1) * g.leaves() * g.limbs;
        let mut root = self.roots.get(k - 1);
        let ch = tree_setcolor(g, nl, &mut self.h[first..first + nl * g.limbs], &mut root, &mut self.yc, j, (l - 1) % span);
        self.roots.set(k - 1, root);
        if ch.old != j {
            self.counts[ch.old] -= 1;
            self.counts[j] += 1;
        }
        if ch.before != ch.after {
            let present = |s: u32| if s == FULL { g.cmask } else { s };
            let (b, a) = (present(ch.before), present(ch.after));
            for col in [ch.old, j] {
                if (b ^ a) >> col & 1 == 1 {
                    let holds = a >> col & 1 == 1;
                    self.has[col].put(k, holds != (col == 0));
                }
            }
        }
        Ok(())
    }

    fn choice(&self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        if self.c == 1 {
            return Ok((self.n > 0) as usize);
        }
        if self.trees > 0 {
            let k = self.has[j].choice_side(Self::side(j));
            if k != 0 {
                let x = self.tree_next(k, j, 0).expect("indexed tree holds the color");
                return Ok((k - 1) * self.span() + x + 1);
            }
        }
        let x = self.tail.choice(j)?;
        Ok(if x == 0 { 0 } else { self.tail_start() + x })
    }

    fn size(&self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        Ok(self.counts[j])
    }
}

impl Iterable for NonsysChoiceDict {
    fn iter_init(&mut self, j: usize) -> Result<()> {
        self.check_j(j)?;
        if self.c == 1 {
            self.walks[0] = Walk::Tail { last: 0 };
            return Ok(());
        }
        if self.trees > 0 {
            self.has[j].iter_init_side(Self::side(j));
            self.walks[j] = Walk::Trees { cur: 0, from: 0 };
        } else {
            self.walks[j] = Walk::Tail { last: 0 };
        }
        Ok(())
    }

    fn iter_more(&mut self, j: usize) -> Result<bool> {
        self.check_j(j)?;
        if self.c == 1 {
            let Walk::Tail { last } = self.walks[0] else { unreachable!() };
            return Ok(last < self.n);
        }
        Ok(match self.walks[j] {
            Walk::Trees { cur, from } => {
                (cur != 0 && self.tree_next(cur, j, from).is_some())
                    || self.has[j].iter_more_side(Self::side(j))
                    || self.tail.successor(j, 0)? != 0
            }
            Walk::Tail { last } => last < self.tail.universe() && self.tail.successor(j, last)? != 0,
        })
    }

    fn iter_next(&mut self, j: usize) -> Result<usize> {
        self.check_j(j)?;
        if self.c == 1 {
            let Walk::Tail { last } = &mut self.walks[0] else { unreachable!() };
            if *last >= self.n {
                return Ok(0);
            }
            *last += 1;
            return Ok(*last);
        }
        loop {
            match self.walks[j] {
                Walk::Trees { cur, from } => {
                    if cur != 0 {
                        if let Some(x) = self.tree_next(cur, j, from) {
                            self.walks[j] = Walk::Trees { cur, from: x + 1 };
                            return Ok((cur - 1) * self.span() + x + 1);
                        }
                    }
                    let k = self.has[j].iter_next_side(Self::side(j));
                    self.walks[j] = if k == 0 { Walk::Tail { last: 0 } } else { Walk::Trees { cur: k, from: 0 } };
                }
                Walk::Tail { last } => {
                    if last >= self.tail.universe() {
                        return Ok(0);
                    }
                    let x = self.tail.successor(j, last)?;
                    if x == 0 {
                        self.walks[j] = Walk::Tail { last: self.tail.universe() };
                        return Ok(0);
                    }
                    self.walks[j] = Walk::Tail { last: x };
                    return Ok(self.tail_start() + x);
                }
            }
        }
    }
}

impl SpaceUsage for NonsysChoiceDict {
    fn bits_used(&self) -> u64 {
        let uppers: u64 = self.init.iter().chain(self.has.iter()).map(|d| d.bits_used()).sum();
        let tail = if self.g.is_some() { self.tail.bits_used() } else { 0 };
        let counts = word_bits(self.c as u64 * crate::bits_for(self.n as u64) as u64);
        let walks = word_bits(self.c as u64 * 2 * crate::bits_for(self.n as u64) as u64);
        word_bits(self.h.len() as u64 * 64)
            + self.roots.bits_used()
            + uppers
            + tail
            + counts
            + walks
            + self.yc.bits_used()
            + 64 * 6
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traits::elements;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_leaf(g: &Geometry, rng: &mut ChaCha8Rng, jb: usize) -> Vec<usize> {
        // Few colors most of the time, so that summary bits are exercised
        // in both states.
        let k = rng.gen_range(1..g.c);
        let pal: Vec<usize> = (0..k).map(|_| unskip(jb, rng.gen_range(0..g.c - 1))).collect();
        (0..g.digits).map(|_| pal[rng.gen_range(0..k)]).collect()
    }

    #[test]
    fn geometry_examples() {
        let g = Geometry::new(2, 2).unwrap();
        assert_eq!((g.degree(), g.word_bits(), g.digits(), g.leaves(), g.payload_bits()), (8, 128, 128, 64, 32));
        let g = Geometry::new(4, 2).unwrap();
        assert_eq!((g.degree(), g.word_bits(), g.digits(), g.leaves(), g.payload_bits()), (2, 256, 128, 4, 16));
        let g = Geometry::new(8, 1).unwrap();
        assert_eq!((g.degree(), g.word_bits(), g.digits()), (2, 768, 256));
        assert!(Geometry::new(3, 2).is_err());
        assert!(NonsysChoiceDict::new(10, 6, 2).is_err());
        // Free bits match the payload count.
        for (c, t) in [(2, 1), (2, 2), (2, 4), (4, 1), (4, 2), (8, 1), (8, 2)] {
            let g = Geometry::new(c, t).unwrap();
            assert_eq!(g.word_bits() / (2 * g.c * g.f), g.payload_bits());
            assert_eq!(g.big_groups(), g.d * g.t);
        }
    }

    #[test]
    fn all_zero_leaf_converts() {
        let mut l = LeafDict::new(4, 2).unwrap();
        l.to_jfree(1).unwrap();
        assert_eq!(l.present(), 1);
        for g in 0..l.geometry().big_groups() {
            assert_eq!(l.summary(g, 0), Some(true));
            assert_eq!(l.summary(g, 2), Some(false));
            assert_eq!(l.summary(g, 3), Some(false));
        }
        l.to_standard();
        assert!(l.words().iter().all(|&w| w == 0));
    }

    #[test]
    fn jfree_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for it in 0..100_000 {
            let (c, t) = [(2, 2), (4, 1), (4, 2), (8, 1)][it % 4];
            let mut l = LeafDict::new(c, t).unwrap();
            let g = l.geometry().clone();
            let jb = rng.gen_range(0..c);
            let digits = random_leaf(&g, &mut rng, jb);
            for (m, &x) in digits.iter().enumerate() {
                l.setcolor(x, m + 1).unwrap();
            }
            let before = l.words().to_vec();
            l.to_jfree(jb).unwrap();
            for gi in 0..g.big_groups() {
                let part = &digits[gi * g.group..(gi + 1) * g.group];
                for j in (0..c).filter(|&j| j != jb) {
                    assert_eq!(l.summary(gi, j), Some(part.contains(&j)));
                }
            }
            let m = rng.gen_range(1..=g.digits);
            assert_eq!(l.color(m).unwrap(), digits[m - 1]);
            l.to_standard();
            assert_eq!(l.words(), &before[..]);
        }
    }

    #[test]
    fn standard_leaf_matches_atomic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for c in [2, 4, 8] {
            let mut l = LeafDict::new(c, 1).unwrap();
            let w = l.geometry().digits();
            let mut a = AtomicChoiceDict::new(w, c);
            for _ in 0..20_000 {
                let (j, m) = (rng.gen_range(0..c), rng.gen_range(1..=w));
                l.setcolor(j, m).unwrap();
                a.setcolor(j, m).unwrap();
                let (j, m) = (rng.gen_range(0..c), rng.gen_range(0..=w));
                assert_eq!(l.successor(j, m).unwrap(), a.successor(j, m).unwrap());
                if m > 0 {
                    assert_eq!(l.color(m).unwrap(), a.color(m).unwrap());
                }
            }
        }
    }

    #[test]
    fn jfree_ops_match_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for c in [2, 4, 8] {
            let mut l = LeafDict::new(c, 2).unwrap();
            let g = l.geometry().clone();
            let jb = rng.gen_range(0..c);
            let mut shadow = vec![0usize; g.digits];
            if jb == 0 {
                shadow.fill(1);
                for m in 1..=g.digits {
                    l.setcolor(1, m).unwrap();
                }
            }
            l.to_jfree(jb).unwrap();
            let payload: Vec<bool> = (0..g.payload_bits()).map(|_| rng.gen()).collect();
            for (q, &b) in payload.iter().enumerate() {
                l.set_payload(q, b).unwrap();
            }
            for _ in 0..20_000 {
                let (j, m) = (rng.gen_range(0..c), rng.gen_range(1..=g.digits));
                if j == jb {
                    assert!(l.setcolor(j, m).is_err());
                    continue;
                }
                // Keep colors sparse so that groups empty out again.
                let j = if rng.gen_bool(0.7) { unskip(jb, 0) } else { j };
                l.setcolor(j, m).unwrap();
                shadow[m - 1] = j;
                let (j, from) = (rng.gen_range(0..c), rng.gen_range(0..=g.digits));
                let want = (from..g.digits).find(|&x| shadow[x] == j).map_or(0, |x| x + 1);
                assert_eq!(l.successor(j, from).unwrap(), want);
            }
            for gi in 0..g.big_groups() {
                for j in (0..c).filter(|&j| j != jb) {
                    assert_eq!(l.summary(gi, j), Some(shadow[gi * g.group..(gi + 1) * g.group].contains(&j)));
                }
            }
            for (q, &b) in payload.iter().enumerate() {
                assert_eq!(l.payload(q).unwrap(), b);
            }
        }
    }

    #[test]
    fn setcolor_to_missing_color_rejected() {
        let mut l = LeafDict::new(2, 2).unwrap();
        l.to_jfree(1).unwrap();
        assert!(matches!(l.setcolor(1, 5), Err(Error::Precondition(_))));
        assert!(l.to_jfree(0).is_err());
    }

    #[test]
    fn resolve_examples() {
        let s = SmallTreeDict::new(2, 2).unwrap();
        for i in 1..=64 {
            assert_eq!(s.resolve(i).unwrap(), Resolved { pi: i, spectrum: EMPTY, proxy: false });
        }
        // Leaf 2 holds only color 1: one light path from the root to leaf 2
        // with historian 1.
        let mut s = SmallTreeDict::new(2, 2).unwrap();
        let w = s.geometry().digits();
        let mut shadow = vec![0; s.universe()];
        for l in w + 1..=2 * w {
            s.setcolor(1, l).unwrap();
            shadow[l - 1] = 1;
        }
        s.audit(&shadow).unwrap();
        assert_eq!(s.resolve(2).unwrap(), Resolved { pi: 1, spectrum: 0b10, proxy: true });
        assert_eq!(s.resolve(1).unwrap(), Resolved { pi: 2, spectrum: EMPTY, proxy: false });
        // Every leaf gets one element of color 1: full tree.
        let mut s = SmallTreeDict::new(2, 2).unwrap();
        for i in 0..64 {
            s.setcolor(1, i * w + 7).unwrap();
        }
        for i in 1..=64 {
            assert_eq!(s.resolve(i).unwrap(), Resolved { pi: i, spectrum: FULL, proxy: false });
        }
    }

    #[test]
    fn fresh_tree() {
        let s = SmallTreeDict::new(4, 2).unwrap();
        assert!((1..=s.universe()).all(|l| s.color(l).unwrap() == 0));
        assert_eq!(s.successor(0, 0).unwrap(), 1);
        assert_eq!(s.successor(1, 0).unwrap(), 0);
    }

    fn tree_trace(c: usize, t: usize, leaves: usize, ops: usize, seed: u64, garbage: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = if garbage {
            SmallTreeDict::with_garbage(c, t, leaves, seed).unwrap()
        } else {
            SmallTreeDict::with_leaves(c, t, leaves).unwrap()
        };
        let n = s.universe();
        let w = s.geometry().digits();
        let mut shadow = vec![0usize; n];
        let mut paths = 0;
        // A few hot leaves, each drifting toward a favored color, so that
        // leaves keep turning light, full and empty.
        let mut hot: Vec<(usize, usize, usize)> = (0..3).map(|_| (rng.gen_range(0..leaves), rng.gen_range(0..c), 0)).collect();
        for op in 0..ops {
            if op % 700 == 0 {
                let h = rng.gen_range(0..hot.len());
                hot[h] = (rng.gen_range(0..leaves), rng.gen_range(0..c), 0);
            }
            let (l, j) = if rng.gen_bool(0.9) {
                let h = rng.gen_range(0..hot.len());
                let (leaf, fav, cur) = hot[h];
                hot[h].2 = (cur + 1) % w;
                (leaf * w + cur + 1, if rng.gen_bool(0.995) { fav } else { rng.gen_range(0..c) })
            } else {
                (rng.gen_range(1..=n), rng.gen_range(0..c))
            };
            s.setcolor(j, l).unwrap();
            shadow[l - 1] = j;
            assert_eq!(s.color(l).unwrap(), j);
            let (j, from) = (rng.gen_range(0..c), rng.gen_range(0..=n));
            let want = (from..n).find(|&x| shadow[x] == j).map_or(0, |x| x + 1);
            assert_eq!(s.successor(j, from).unwrap(), want, "op {op}");
            if op % 100 == 99 {
                paths += s.audit(&shadow).unwrap_or_else(|e| panic!("op {op}: {e}"));
            }
        }
        assert!(paths >= ops / 400, "too few light paths seen: {paths}");
    }

    #[test]
    fn tree_traces_f1() {
        tree_trace(2, 2, 64, 100_000, 10, false);
        tree_trace(2, 2, 37, 20_000, 11, true);
        tree_trace(2, 1, 16, 20_000, 12, false);
    }

    #[test]
    fn tree_traces_f2() {
        tree_trace(4, 2, 4, 100_000, 20, false);
        tree_trace(4, 2, 3, 20_000, 21, true);
        tree_trace(4, 1, 2, 20_000, 22, false);
    }

    #[test]
    fn tree_traces_f3() {
        tree_trace(8, 2, 4, 20_000, 30, false);
        tree_trace(2, 4, 200, 20_000, 31, true);
    }

    #[test]
    fn toggled_light_path_keeps_invariant() {
        let mut s = SmallTreeDict::new(2, 2).unwrap();
        let w = s.geometry().digits();
        let mut shadow = vec![0; s.universe()];
        // Leaves 9..16 hold only color 1 except for one element of leaf 12;
        // toggling that element creates and destroys a light path.
        for l in 8 * w + 1..=16 * w {
            s.setcolor(1, l).unwrap();
            shadow[l - 1] = 1;
        }
        let x = 11 * w + 5;
        for op in 0..10_000 {
            let j = op % 2;
            s.setcolor(j, x).unwrap();
            shadow[x - 1] = j;
            let y = 3 * w + 1 + op % 3;
            s.setcolor(1 - j, y).unwrap();
            shadow[y - 1] = 1 - j;
            if op % 100 == 0 {
                s.audit(&shadow).unwrap();
            }
        }
        s.audit(&shadow).unwrap();
    }

    #[test]
    fn fresh_dictionary() {
        let d = NonsysChoiceDict::new(100_000, 4, 2).unwrap();
        assert_ne!(d.choice(0).unwrap(), 0);
        assert!((1..4).all(|j| d.choice(j).unwrap() == 0));
        let d = NonsysChoiceDict::new(5, 1, 2).unwrap();
        assert_eq!(d.choice(0).unwrap(), 1);
    }

    #[test]
    fn space_small_trees() {
        let n = 1_000_000;
        let mut d = NonsysChoiceDict::new(n, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100_000 {
            d.setcolor(rng.gen_range(0..2), rng.gen_range(1..=n)).unwrap();
        }
        let b = d.bits_used();
        assert!(b <= (n + n / 16 + 10_000) as u64, "{b}");
    }

    #[test]
    fn space_at_two_to_twenty() {
        let n = 1 << 20;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for (c, bound) in [(2, n + n / 16 + 10_000), (4, 2 * n + n / 4 + 100_000)] {
            let mut d = NonsysChoiceDict::new(n, c, 2).unwrap();
            for _ in 0..200_000 {
                d.setcolor(rng.gen_range(0..c), rng.gen_range(1..=n)).unwrap();
            }
            assert!(d.bits_used() <= bound as u64, "c={c}: {}", d.bits_used());
        }
    }

    fn fuzz(n: usize, c: usize, t: usize, ops: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = NonsysChoiceDict::with_garbage(n, c, t, seed).unwrap();
        let mut shadow = vec![0usize; n];
        let mut iter: Option<(usize, Vec<bool>, Vec<bool>)> = None;
        let mut hot = (0, 0);
        for op in 0..ops {
            if op % 300 == 0 {
                hot = (rng.gen_range(0..n), rng.gen_range(0..c));
            }
            match rng.gen_range(0..10) {
                0..=5 => {
                    // Half the updates paint a window with one favored
                    // color, so that leaves turn light, full and empty.
                    let (l, j) = if rng.gen_bool(0.5) {
                        (rng.gen_range(1..=n), rng.gen_range(0..c))
                    } else {
                        let l = (hot.0 + rng.gen_range(0..300)) % n + 1;
                        (l, if rng.gen_bool(0.95) { hot.1 } else { rng.gen_range(0..c) })
                    };
                    d.setcolor(j, l).unwrap();
                    shadow[l - 1] = j;
                    if let Some((jj, absent, _)) = &mut iter {
                        if j != *jj {
                            absent[l - 1] = true;
                        }
                    }
                }
                6 => {
                    let l = rng.gen_range(1..=n);
                    assert_eq!(d.color(l).unwrap(), shadow[l - 1]);
                }
                7 => {
                    let j = rng.gen_range(0..c);
                    let x = d.choice(j).unwrap();
                    let present = shadow.contains(&j);
                    assert_eq!(x != 0, present, "choice({j}) op {op}");
                    if x != 0 {
                        assert_eq!(shadow[x - 1], j);
                    }
                }
                _ => match &mut iter {
                    None => {
                        let j = rng.gen_range(0..c);
                        d.iter_init(j).unwrap();
                        let absent: Vec<bool> = shadow.iter().map(|&x| x != j).collect();
                        iter = Some((j, absent, vec![false; n]));
                    }
                    Some((j, absent, seen)) => {
                        let j = *j;
                        let more = d.iter_more(j).unwrap();
                        let x = d.iter_next(j).unwrap();
                        assert_eq!(more, x != 0);
                        if x == 0 {
                            for l in 0..n {
                                assert!(absent[l] || seen[l], "element {} missed", l + 1);
                            }
                            iter = None;
                        } else {
                            assert_eq!(shadow[x - 1], j, "returned outside the class");
                            assert!(absent[x - 1] || !seen[x - 1], "returned twice");
                            seen[x - 1] = true;
                        }
                    }
                },
            }
            assert_eq!(d.size(0).unwrap(), shadow.iter().filter(|&&x| x == 0).count());
        }
        d.audit(&shadow).unwrap();
    }

    #[test]
    fn dictionary_fuzz() {
        for (i, &n) in [1usize, 2, 63, 64, 65, 1000, 20_000].iter().enumerate() {
            for c in [1, 2, 4, 8] {
                fuzz(n, c, 2, 20_000, (i * 10 + c) as u64);
            }
        }
        fuzz(50_000, 2, 1, 50_000, 99);
    }

    #[test]
    fn dictionary_fuzz_long() {
        fuzz(100_000, 2, 2, 1_000_000, 7);
        fuzz(100_000, 4, 2, 1_000_000, 8);
    }

    #[test]
    fn full_enumeration() {
        let mut d = NonsysChoiceDict::new(10_000, 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut shadow = vec![0; 10_000];
        for _ in 0..5000 {
            let (j, l) = (rng.gen_range(0..4), rng.gen_range(1..=10_000));
            d.setcolor(j, l).unwrap();
            shadow[l - 1] = j;
        }
        for j in 0..4 {
            let mut got = elements(&mut d, j).unwrap();
            got.sort_unstable();
            let want: Vec<usize> = (1..=10_000).filter(|&l| shadow[l - 1] == j).collect();
            assert_eq!(got, want);
        }
        assert!(d.table_entries() > 0);
        d.audit(&shadow).unwrap();
    }
}
