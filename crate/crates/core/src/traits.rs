//! Operation contracts shared by the dictionaries, and the generic
//! reductions between them (choice from p-select, iteration from
//! successor, uniform sampling from p-select, element listing from
//! iteration).

use crate::Result;
use rand::Rng;

/// A dictionary over `{1, ..., n}` maintaining a semipartition into `c`
/// color classes `S_0, ..., S_{c-1}`; initially every element has color 0.
pub trait ColorDict {
    fn universe(&self) -> usize;
    fn num_colors(&self) -> usize;
    fn color(&self, l: usize) -> Result<usize>;
    fn setcolor(&mut self, j: usize, l: usize) -> Result<()>;
    /// Some element of `S_j`, or 0 if `S_j` is empty.
    fn choice(&self, j: usize) -> Result<usize>;
    /// `|S_j|`.
    fn size(&self, j: usize) -> Result<usize>;
    fn is_empty_color(&self, j: usize) -> Result<bool> {
        Ok(self.size(j)? == 0)
    }
}

/// A bijection between `S_j` and `{1, ..., |S_j|}` that stays fixed between
/// calls of `setcolor`.
pub trait PRankSelect: ColorDict {
    fn p_rank(&self, l: usize) -> Result<usize>;
    /// The `k`-th element of `S_j` under the bijection, 0 if `k > |S_j|`.
    fn p_select(&self, j: usize, k: usize) -> Result<usize>;
}

/// Robust iteration: an element that stays in `S_j` from `init` until the
/// iteration ends is returned exactly once; an element is never returned at
/// a time when it is outside `S_j`.
pub trait Iterable: ColorDict {
    fn iter_init(&mut self, j: usize) -> Result<()>;
    fn iter_more(&mut self, j: usize) -> Result<bool>;
    /// Next element, or 0 once the iteration is exhausted.
    fn iter_next(&mut self, j: usize) -> Result<usize>;
}

/// Ordered neighbor search within a color class.
pub trait Successor: ColorDict {
    /// Smallest element of `S_j` greater than `l` (`0 <= l <= n`), or 0.
    fn successor(&self, j: usize, l: usize) -> Result<usize>;
    /// Largest element of `S_j` smaller than `l` (`1 <= l <= n + 1`), or 0.
    fn predecessor(&self, j: usize, l: usize) -> Result<usize>;
}

/// Iteration state for the reduction of iteration to successor: one
/// integer per color remembering the last element returned.
#[derive(Clone, Debug)]
pub struct SuccessorIter {
    last: Vec<usize>,
}

impl SuccessorIter {
    pub fn new(c: usize) -> Self {
        SuccessorIter { last: vec![0; c] }
    }
    pub fn init(&mut self, j: usize) {
        self.last[j] = 0;
    }
    pub fn more<D: Successor + ?Sized>(&self, d: &D, j: usize) -> Result<bool> {
        let l = self.last[j];
        Ok(l < d.universe() && d.successor(j, l)? != 0)
    }
    pub fn next<D: Successor + ?Sized>(&mut self, d: &D, j: usize) -> Result<usize> {
        let l = self.last[j];
        if l >= d.universe() {
            return Ok(0);
        }
        let s = d.successor(j, l)?;
        if s != 0 {
            self.last[j] = s;
        } else {
            self.last[j] = d.universe();
        }
        Ok(s)
    }
    pub fn state_bits(&self, n: usize) -> u64 {
        self.last.len() as u64 * crate::bits_for(n as u64) as u64
    }
}

/// `p-select(j, random(size(j)))`.
pub fn uniform_choice<D: PRankSelect + ?Sized, R: Rng + ?Sized>(d: &D, j: usize, rng: &mut R) -> Result<usize> {
    let s = d.size(j)?;
    if s == 0 {
        return Ok(0);
    }
    d.p_select(j, rng.gen_range(1..=s))
}

/// All elements of `S_j`, via a full iteration.
pub fn elements<D: Iterable + ?Sized>(d: &mut D, j: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    d.iter_init(j)?;
    while d.iter_more(j)? {
        let x = d.iter_next(j)?;
        if x == 0 {
            break;
        }
        out.push(x);
    }
    Ok(out)
}
