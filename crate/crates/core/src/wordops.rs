//! Broadword kernel.
//!
//! A [`PackedVector`] holds `m` fields of `f` bits each, laid out from the
//! least significant bit of limb 0 upward; field `i` (1-based) occupies bits
//! `(i-1)f .. if` of the little-endian multiword integer. Every operation
//! here works a limb at a time with a constant number of scratch words per
//! limb, so costs are `O(1 + m f / 64)`.

use crate::{Error, Result};

/// Logical word length.
pub const W: usize = 64;

/// Multiword little-endian helpers. All of them wrap modulo `2^(64 len)`.
pub mod mw {
    /// `a += b`, returns the carry out.
    pub fn add(a: &mut [u64], b: &[u64]) -> bool {
        let mut carry = false;
        for (i, x) in a.iter_mut().enumerate() {
            let y = b.get(i).copied().unwrap_or(0);
            let (s1, c1) = x.overflowing_add(y);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            *x = s2;
            carry = c1 || c2;
        }
        carry
    }

    /// `a -= b`, returns the borrow out.
    pub fn sub(a: &mut [u64], b: &[u64]) -> bool {
        let mut borrow = false;
        for (i, x) in a.iter_mut().enumerate() {
            let y = b.get(i).copied().unwrap_or(0);
            let (s1, c1) = x.overflowing_sub(y);
            let (s2, c2) = s1.overflowing_sub(borrow as u64);
            *x = s2;
            borrow = c1 || c2;
        }
        borrow
    }

    pub fn shl(a: &mut [u64], s: usize) {
        let n = a.len();
        let (q, r) = (s / 64, s % 64);
        for i in (0..n).rev() {
            let lo = if i >= q { a[i - q] } else { 0 };
            let lo2 = if i > q { a[i - q - 1] } else { 0 };
            a[i] = if r == 0 { lo } else { (lo << r) | (lo2 >> (64 - r)) };
        }
    }

    pub fn shr(a: &mut [u64], s: usize) {
        let n = a.len();
        let (q, r) = (s / 64, s % 64);
        for i in 0..n {
            let hi = a.get(i + q).copied().unwrap_or(0);
            let hi2 = a.get(i + q + 1).copied().unwrap_or(0);
            a[i] = if r == 0 { hi } else { (hi >> r) | (hi2 << (64 - r)) };
        }
    }

    /// `out = (a * b) mod 2^(64 out.len())`.
    pub fn mul_trunc(a: &[u64], b: &[u64], out: &mut [u64]) {
        out.iter_mut().for_each(|x| *x = 0);
        let n = out.len();
        for (i, &x) in a.iter().enumerate().take(n) {
            if x == 0 {
                continue;
            }
            let mut carry: u128 = 0;
            for (j, &y) in b.iter().enumerate() {
                if i + j >= n {
                    break;
                }
                let t = (x as u128) * (y as u128) + out[i + j] as u128 + carry;
                out[i + j] = t as u64;
                carry = t >> 64;
            }
            let mut k = i + b.len();
            while carry != 0 && k < n {
                let t = out[k] as u128 + carry;
                out[k] = t as u64;
                carry = t >> 64;
                k += 1;
            }
        }
    }

    /// Clears every bit at position `>= bits`.
    pub fn mask(a: &mut [u64], bits: usize) {
        for (i, x) in a.iter_mut().enumerate() {
            let lo = i * 64;
            if lo >= bits {
                *x = 0;
            } else if bits - lo < 64 {
                *x &= (1u64 << (bits - lo)) - 1;
            }
        }
    }

    pub fn is_zero(a: &[u64]) -> bool {
        a.iter().all(|&x| x == 0)
    }

    /// Reads `len <= 64` bits starting at bit `pos`.
    #[inline]
    pub fn get_bits(a: &[u64], pos: usize, len: usize) -> u64 {
        if len == 0 {
            return 0;
        }
        let (q, r) = (pos / 64, pos % 64);
        let mut v = a[q] >> r;
        if r + len > 64 {
            v |= a[q + 1] << (64 - r);
        }
        if len < 64 {
            v &= (1u64 << len) - 1;
        }
        v
    }

    /// Writes the low `len <= 64` bits of `v` at bit `pos`.
    #[inline]
    pub fn set_bits(a: &mut [u64], pos: usize, len: usize, v: u64) {
        if len == 0 {
            return;
        }
        let mask = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
        let v = v & mask;
        let (q, r) = (pos / 64, pos % 64);
        a[q] = (a[q] & !(mask << r)) | (v << r);
        if r + len > 64 {
            let hi = len - (64 - r);
            let m2 = (1u64 << hi) - 1;
            a[q + 1] = (a[q + 1] & !m2) | (v >> (64 - r));
        }
    }
}

/// `m` fields of `f` bits in little-endian limbs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedVector {
    limbs: Vec<u64>,
    m: usize,
    f: usize,
}

fn limbs_for(m: usize, f: usize) -> usize {
    (m * f).div_ceil(W)
}

impl PackedVector {
    /// All-zero vector of `m` fields of width `f`.
    pub fn new(m: usize, f: usize) -> Result<Self> {
        if m == 0 || f == 0 || f > W {
            return Err(Error::OutOfRange { what: "field shape", value: (m.max(f)) as u64 });
        }
        m.checked_mul(f).ok_or(Error::OutOfRange { what: "m*f", value: m as u64 })?;
        Ok(PackedVector { limbs: vec![0; limbs_for(m, f)], m, f })
    }

    pub fn from_fields(f: usize, fields: &[u64]) -> Result<Self> {
        let mut v = Self::new(fields.len(), f)?;
        for (i, &a) in fields.iter().enumerate() {
            v.set(i, a)?;
        }
        Ok(v)
    }

    /// Wraps raw limbs; bits beyond `m f` are cleared.
    pub fn from_limbs(m: usize, f: usize, mut limbs: Vec<u64>) -> Result<Self> {
        let mut v = Self::new(m, f)?;
        limbs.resize(v.limbs.len(), 0);
        mw::mask(&mut limbs, m * f);
        v.limbs = limbs;
        Ok(v)
    }

    pub fn m(&self) -> usize {
        self.m
    }
    pub fn f(&self) -> usize {
        self.f
    }
    pub fn limbs(&self) -> &[u64] {
        &self.limbs
    }
    pub fn bits(&self) -> usize {
        self.m * self.f
    }

    /// Field `i`, 0-based.
    pub fn get(&self, i: usize) -> u64 {
        mw::get_bits(&self.limbs, i * self.f, self.f)
    }

    pub fn set(&mut self, i: usize, v: u64) -> Result<()> {
        if i >= self.m {
            return Err(Error::OutOfRange { what: "field index", value: i as u64 });
        }
        if self.f < 64 && v >> self.f != 0 {
            return Err(Error::OutOfRange { what: "field value", value: v });
        }
        mw::set_bits(&mut self.limbs, i * self.f, self.f, v);
        Ok(())
    }

    pub fn fields(&self) -> Vec<u64> {
        (0..self.m).map(|i| self.get(i)).collect()
    }

    fn same_shape(&self, o: &Self) {
        assert!(self.m == o.m && self.f == o.f, "shape mismatch");
    }

    fn finish(mut self) -> Self {
        let b = self.bits();
        mw::mask(&mut self.limbs, b);
        self
    }

    pub fn wrapping_add(&self, o: &Self) -> Self {
        self.same_shape(o);
        let mut r = self.clone();
        mw::add(&mut r.limbs, &o.limbs);
        r.finish()
    }
    pub fn wrapping_sub(&self, o: &Self) -> Self {
        self.same_shape(o);
        let mut r = self.clone();
        mw::sub(&mut r.limbs, &o.limbs);
        r.finish()
    }
    pub fn wrapping_mul(&self, o: &Self) -> Self {
        self.same_shape(o);
        let mut r = self.clone();
        mw::mul_trunc(&self.limbs, &o.limbs, &mut r.limbs);
        r.finish()
    }
    pub fn and(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a & b)
    }
    pub fn or(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a | b)
    }
    pub fn xor(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a ^ b)
    }
    fn zip(&self, o: &Self, op: impl Fn(u64, u64) -> u64) -> Self {
        self.same_shape(o);
        let limbs = self.limbs.iter().zip(&o.limbs).map(|(&a, &b)| op(a, b)).collect();
        PackedVector { limbs, m: self.m, f: self.f }.finish()
    }
    pub fn shl(&self, s: usize) -> Self {
        let mut r = self.clone();
        mw::shl(&mut r.limbs, s);
        r.finish()
    }
    pub fn shr(&self, s: usize) -> Self {
        let mut r = self.clone();
        mw::shr(&mut r.limbs, s);
        r
    }
    pub fn is_zero(&self) -> bool {
        mw::is_zero(&self.limbs)
    }
}

/// The constant `1_{m,f}`: a 1 in every field.
pub fn ones_pattern(m: usize, f: usize) -> Result<PackedVector> {
    let mut v = PackedVector::new(m, f)?;
    fill_ones(&mut v.limbs, m, f);
    Ok(v)
}

/// Writes `1_{m,f}` into `out` (which must hold `m f` bits).
pub fn fill_ones(out: &mut [u64], m: usize, f: usize) {
    out.iter_mut().for_each(|x| *x = 0);
    if f >= 64 || 64 % f != 0 {
        for i in 0..m {
            let p = i * f;
            out[p / 64] |= 1u64 << (p % 64);
        }
    } else {
        let per = 64 / f;
        let mut word = 0u64;
        for i in 0..per {
            word |= 1u64 << (i * f);
        }
        let full = m / per;
        for x in out.iter_mut().take(full) {
            *x = word;
        }
        if m % per != 0 {
            out[full] = word & ((1u64 << ((m % per) * f)) - 1);
        }
    }
}

/// `floor(log2 x)` for one nonzero word, by the configured method.
#[inline]
pub fn floor_log_u64(x: u64) -> Option<u32> {
    if x == 0 {
        return None;
    }
    #[cfg(feature = "broadword-log")]
    {
        Some(floor_log_broadword(x))
    }
    #[cfg(not(feature = "broadword-log"))]
    {
        Some(63 - x.leading_zeros())
    }
}

const DEBRUIJN: u64 = 0x03f7_9d71_b4cb_0a89;
const DEBRUIJN_TABLE: [u8; 64] = {
    let mut t = [0u8; 64];
    let mut i = 0;
    while i < 64 {
        t[((DEBRUIJN << i) >> 58) as usize] = i as u8;
        i += 1;
    }
    t
};

/// Portable fallback: smear the top bit downward, isolate it, and look up the
/// position through a de Bruijn multiplication.
pub fn floor_log_debruijn(x: u64) -> u32 {
    debug_assert!(x != 0);
    let mut v = x;
    v |= v >> 1;
    v |= v >> 2;
    v |= v >> 4;
    v |= v >> 8;
    v |= v >> 16;
    v |= v >> 32;
    let top = v ^ (v >> 1);
    DEBRUIJN_TABLE[(top.wrapping_mul(DEBRUIJN) >> 58) as usize] as u32
}

const H8: u64 = 0x8080_8080_8080_8080;
const L7: u64 = 0x7f7f_7f7f_7f7f_7f7f;
const ONES8: u64 = 0x0101_0101_0101_0101;
const GATHER8: u64 = 0x0102_0408_1020_4080;
// Byte i keeps the bits of weight >= 2^i.
const STEP_MASKS: u64 = 0x80c0_e0f0_f8fc_feff;

#[inline]
fn nonzero_bytes(x: u64) -> u64 {
    (x | ((x & L7).wrapping_add(L7))) & H8
}

/// floor(log2 v) for 1 <= v <= 255 without branches or table lookups.
#[inline]
fn msb_byte(v: u64) -> u32 {
    let rep = v.wrapping_mul(ONES8) & STEP_MASKS;
    let nz = nonzero_bytes(rep) >> 7;
    (nz.wrapping_mul(ONES8) >> 56) as u32 - 1
}

/// Multiplication-only floor_log in the style of Fredman and Willard: locate
/// the highest nonzero byte with a parallel zero test, then the highest bit
/// in that byte with a parallel comparison against powers of two.
pub fn floor_log_broadword(x: u64) -> u32 {
    debug_assert!(x != 0);
    let flags = (nonzero_bytes(x) >> 7).wrapping_mul(GATHER8) >> 56;
    let byte = msb_byte(flags);
    8 * byte + msb_byte((x >> (8 * byte)) & 0xff)
}

/// `floor(log2 x)` of a little-endian multiword integer.
pub fn floor_log(x: &[u64]) -> Result<usize> {
    for i in (0..x.len()).rev() {
        if let Some(b) = floor_log_u64(x[i]) {
            return Ok(i * 64 + b as usize);
        }
    }
    Err(Error::Undefined("floor_log(0)"))
}

/// Which fields [`field_extrema`] looks at.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldMode {
    Nonzero,
    Zero,
}

/// Result of [`field_extrema`]; indices are 1-based and meaningless when
/// `is_empty`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Extrema {
    pub is_empty: bool,
    pub min: usize,
    pub max: usize,
}

/// Lowest set bit of `x` as a power of two: `((x xor (x-1)) + 1) / 2`, written
/// so that a set top bit does not overflow.
#[inline]
pub fn lowest_one(x: u64) -> u64 {
    ((x ^ x.wrapping_sub(1)) >> 1).wrapping_add(1)
}

/// Transforms the fields of a chunk so that a field becomes nonzero iff it was
/// zero. `t` holds the test-bit pattern for the chunk, `scratch` is one more
/// chunk of storage.
pub fn zero_fields_to_flags(x: &mut [u64], t: &[u64], f: usize, scratch: &mut [u64]) {
    // y = x & t
    for i in 0..x.len() {
        scratch[i] = x[i] & t[i];
    }
    // x - y
    mw::sub(x, &scratch[..x.len()]);
    // y >> (f-1)
    mw::shr(&mut scratch[..x.len()], f - 1);
    // z = (x - y) | (y >> (f-1)); xbar = (t - z) & t
    for i in 0..x.len() {
        scratch[i] |= x[i];
        x[i] = t[i];
    }
    mw::sub(x, &scratch[..x.len()]);
    for i in 0..x.len() {
        x[i] &= t[i];
    }
}

/// Extrema of the nonzero (or zero) fields.
pub fn field_extrema(x: &PackedVector, mode: FieldMode) -> Extrema {
    let f = x.f;
    let owned;
    let limbs: &[u64] = match mode {
        FieldMode::Nonzero => &x.limbs,
        FieldMode::Zero => {
            let t = ones_pattern(x.m, f).expect("shape").shl(f - 1);
            let mut v = x.limbs.clone();
            let mut scratch = vec![0u64; v.len()];
            zero_fields_to_flags(&mut v, &t.limbs, f, &mut scratch);
            owned = v;
            &owned
        }
    };
    nonzero_extrema(limbs, f)
}

/// Extrema of the nonzero fields of raw limbs.
pub fn nonzero_extrema(limbs: &[u64], f: usize) -> Extrema {
    let max = match floor_log(limbs) {
        Ok(b) => b / f + 1,
        Err(_) => return Extrema { is_empty: true, min: 0, max: 0 },
    };
    let i = limbs.iter().position(|&w| w != 0).unwrap();
    let low = floor_log_u64(lowest_one(limbs[i])).unwrap() as usize + 64 * i;
    Extrema { is_empty: false, min: low / f + 1, max }
}

/// Field i of the result is 1 iff `k >= a_i`.
pub fn parallel_leq(x: &PackedVector, k: u64) -> Result<PackedVector> {
    let f = x.f;
    if f < 64 && k >> f != 0 {
        return Err(Error::OutOfRange { what: "k", value: k });
    }
    let ones = ones_pattern(x.m, f)?;
    let t = ones.shl(f - 1);
    let mut kv = PackedVector::new(x.m, f)?;
    kv.limbs[0] = k;
    let kp = kv.wrapping_mul(&ones);
    let y = kp.or(&t).wrapping_sub(&x.wrapping_sub(&x.and(&t)));
    let zp = kp.or(&y).and(&kp.and(&y).or(&x.xor(&t)));
    Ok(zp.and(&t).shr(f - 1))
}

/// Single-word `parallel_leq` for `m f <= 64`; `ones` is `1_{m,f}`.
#[inline]
pub fn parallel_leq_word(x: u64, k: u64, ones: u64, f: usize) -> u64 {
    let t = ones << (f - 1);
    let kp = k.wrapping_mul(ones);
    let y = (kp | t).wrapping_sub(x - (x & t));
    let zp = (kp | y) & ((kp & y) | (x ^ t));
    (zp & t) >> (f - 1)
}

/// Number of fields `a_i` with `k >= a_i`. Requires `m < 2^f`.
pub fn field_rank(x: &PackedVector, k: u64) -> Result<usize> {
    let f = x.f;
    if f < 64 && (x.m as u64) >> f != 0 {
        return Err(Error::Precondition("field_rank needs m < 2^f"));
    }
    let z = parallel_leq(x, k)?;
    let ones = ones_pattern(x.m, f)?;
    let prod = z.wrapping_mul(&ones);
    let top = mw::get_bits(&prod.limbs, (x.m - 1) * f, f);
    Ok(top as usize)
}

/// Single-word `field_rank` for `m f <= 64` and `m < 2^f`.
#[inline]
pub fn field_rank_word(x: u64, k: u64, m: usize, f: usize, ones: u64) -> usize {
    let z = parallel_leq_word(x, k, ones, f);
    let prod = z.wrapping_mul(ones);
    let top = prod >> ((m - 1) * f);
    (if f == 64 { top } else { top & ((1u64 << f) - 1) }) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scan_extrema(a: &[u64], mode: FieldMode) -> Extrema {
        let idx: Vec<usize> = (0..a.len())
            .filter(|&i| (a[i] != 0) == (mode == FieldMode::Nonzero))
            .map(|i| i + 1)
            .collect();
        match (idx.first(), idx.last()) {
            (Some(&lo), Some(&hi)) => Extrema { is_empty: false, min: lo, max: hi },
            _ => Extrema { is_empty: true, min: 0, max: 0 },
        }
    }

    fn random_fields(rng: &mut ChaCha8Rng, m: usize, f: usize) -> Vec<u64> {
        let mask = if f == 64 { u64::MAX } else { (1u64 << f) - 1 };
        (0..m)
            .map(|_| match rng.gen_range(0..4) {
                0 => 0,
                1 => mask,
                _ => rng.gen::<u64>() & mask,
            })
            .collect()
    }

    #[test]
    fn ones_examples() {
        assert_eq!(ones_pattern(3, 4).unwrap().limbs(), &[0x111]);
        assert_eq!(ones_pattern(1, 1).unwrap().limbs(), &[1]);
        let v = ones_pattern(5, 13).unwrap();
        assert!((0..5).all(|i| v.get(i) == 1));
        assert!(ones_pattern(0, 3).is_err());
        assert!(ones_pattern(3, 65).is_err());
        for (m, f) in [(7, 3), (100, 7), (64, 1), (9, 64)] {
            let v = ones_pattern(m, f).unwrap();
            assert!((0..m).all(|i| v.get(i) == 1));
        }
    }

    #[test]
    fn floor_log_examples() {
        assert_eq!(floor_log(&[1]).unwrap(), 0);
        assert_eq!(floor_log(&[1000]).unwrap(), 9);
        assert!(floor_log(&[0, 0]).is_err());
        for k in 0..64 {
            assert_eq!(floor_log(&[1u64 << k]).unwrap(), k);
            assert_eq!(floor_log(&[0, 1u64 << k]).unwrap(), 64 + k);
        }
    }

    fn halving(mut x: u64) -> u32 {
        let mut r = 0;
        while x > 1 {
            x /= 2;
            r += 1;
        }
        r
    }

    #[test]
    fn floor_log_methods_agree_with_halving() {
        for x in 1..=(1u64 << 20) {
            let h = halving(x);
            assert_eq!(floor_log_u64(x).unwrap(), h);
            assert_eq!(floor_log_debruijn(x), h);
            assert_eq!(floor_log_broadword(x), h);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let len = rng.gen_range(1..5);
            let mut v: Vec<u64> = (0..len).map(|_| rng.gen::<u64>() >> rng.gen_range(0..64)).collect();
            if mw::is_zero(&v) {
                v[0] = 1;
            }
            let top = (0..len).rev().find(|&i| v[i] != 0).unwrap();
            let expect = top * 64 + halving(v[top]) as usize;
            assert_eq!(floor_log(&v).unwrap(), expect);
            assert_eq!(floor_log_broadword(v[top]), halving(v[top]));
            assert_eq!(floor_log_debruijn(v[top]), halving(v[top]));
        }
    }

    #[test]
    fn extrema_examples() {
        let x = PackedVector::from_fields(3, &[0, 5, 0, 2]).unwrap();
        assert_eq!(field_extrema(&x, FieldMode::Nonzero), Extrema { is_empty: false, min: 2, max: 4 });
        let z = PackedVector::new(4, 3).unwrap();
        assert!(field_extrema(&z, FieldMode::Nonzero).is_empty);
        let y = PackedVector::from_fields(2, &[3, 1]).unwrap();
        assert!(field_extrema(&y, FieldMode::Zero).is_empty);
        assert_eq!(field_extrema(&x, FieldMode::Zero), Extrema { is_empty: false, min: 1, max: 3 });
    }

    #[test]
    fn leq_and_rank_examples() {
        let x = PackedVector::from_fields(4, &[2, 7, 0]).unwrap();
        assert_eq!(parallel_leq(&x, 3).unwrap().fields(), vec![1, 0, 1]);
        assert_eq!(field_rank(&x, 3).unwrap(), 2);
        assert_eq!(parallel_leq(&x, 15).unwrap().fields(), vec![1, 1, 1]);
        assert_eq!(field_rank(&x, 15).unwrap(), 3);
        let z = PackedVector::from_fields(2, &[0, 0]).unwrap();
        assert_eq!(parallel_leq(&z, 0).unwrap().fields(), vec![1, 1]);
        let s = PackedVector::from_fields(3, &[5]).unwrap();
        assert_eq!(field_rank(&s, 4).unwrap(), 0);
        assert!(parallel_leq(&x, 16).is_err());
        let big = PackedVector::new(4, 2).unwrap();
        assert!(field_rank(&big, 0).is_err());
    }

    #[test]
    fn fuzz_against_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let widths: Vec<usize> = (1..=16).chain([32, 63]).collect();
        for case in 0..100_000 {
            let f = widths[case % widths.len()];
            let m = rng.gen_range(1..=(4096 / f).min(if case % 50 == 0 { 4096 } else { 40 }));
            let a = random_fields(&mut rng, m, f);
            let x = PackedVector::from_fields(f, &a).unwrap();
            for mode in [FieldMode::Nonzero, FieldMode::Zero] {
                let got = field_extrema(&x, mode);
                let want = scan_extrema(&a, mode);
                assert_eq!(got.is_empty, want.is_empty);
                if !want.is_empty {
                    assert_eq!((got.min, got.max), (want.min, want.max), "f={f} a={a:?}");
                }
            }
            let mask = if f == 64 { u64::MAX } else { (1u64 << f) - 1 };
            let k = if rng.gen_bool(0.5) { a[rng.gen_range(0..m)] } else { rng.gen::<u64>() & mask };
            let z = parallel_leq(&x, k).unwrap();
            let want: Vec<u64> = a.iter().map(|&v| (k >= v) as u64).collect();
            assert_eq!(z.fields(), want);
            let cnt = want.iter().sum::<u64>() as usize;
            if f >= 64 || (m as u64) < (1u64 << f) {
                assert_eq!(field_rank(&x, k).unwrap(), cnt);
                if m * f <= 64 {
                    let ones = ones_pattern(m, f).unwrap().limbs()[0];
                    assert_eq!(field_rank_word(x.limbs()[0], k, m, f, ones), cnt);
                    assert_eq!(parallel_leq_word(x.limbs()[0], k, ones, f), z.limbs()[0]);
                }
            }
        }
    }

    #[test]
    fn multiword_arith() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let a: [u64; 2] = [rng.gen(), rng.gen()];
            let b: [u64; 2] = [rng.gen(), rng.gen()];
            let av = (a[0] as u128) | ((a[1] as u128) << 64);
            let bv = (b[0] as u128) | ((b[1] as u128) << 64);
            let mut s = a;
            mw::add(&mut s, &b);
            assert_eq!((s[0] as u128) | ((s[1] as u128) << 64), av.wrapping_add(bv));
            let mut d = a;
            mw::sub(&mut d, &b);
            assert_eq!((d[0] as u128) | ((d[1] as u128) << 64), av.wrapping_sub(bv));
            let mut p = [0u64; 2];
            mw::mul_trunc(&a, &b, &mut p);
            assert_eq!((p[0] as u128) | ((p[1] as u128) << 64), av.wrapping_mul(bv));
            let sh = rng.gen_range(0..128);
            let mut l = a;
            mw::shl(&mut l, sh);
            assert_eq!((l[0] as u128) | ((l[1] as u128) << 64), av << sh);
            let mut r = a;
            mw::shr(&mut r, sh);
            assert_eq!((r[0] as u128) | ((r[1] as u128) << 64), av >> sh);
        }
    }

    proptest::proptest! {
        #[test]
        fn rank_is_popcount_of_leq(f in 2usize..12, seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = rng.gen_range(1..((1usize << f) - 1).min(200));
            let a = random_fields(&mut rng, m, f);
            let x = PackedVector::from_fields(f, &a).unwrap();
            let k = rng.gen::<u64>() & ((1u64 << f) - 1);
            let z = parallel_leq(&x, k).unwrap();
            let pop = z.fields().iter().sum::<u64>() as usize;
            proptest::prop_assert_eq!(field_rank(&x, k).unwrap(), pop);
        }
    }
}
