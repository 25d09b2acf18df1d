//! Space-efficient choice dictionaries over bounded universes.
//!
//! A choice dictionary maintains a subset (or a vector of disjoint color
//! classes) of `{1, ..., n}` and, besides membership and recoloring, can
//! hand out an arbitrary element of a given class. The crate collects a
//! family of such structures together with the supporting pieces they are
//! built from and a few space-bounded graph algorithms that use them.
//!
//! Universe elements are 1-based throughout; `0` means "no element".

pub mod atomic;
pub mod bits;
pub mod carray;
pub mod dense;
pub mod graphs;
pub mod lazyinit;
pub mod nonsys;
pub mod oracles;
pub mod pool;
pub mod prefixsums;
pub mod ranksel;
pub mod rotperm;
pub mod space;
pub mod traits;
pub mod trie;
pub mod wordops;

pub use traits::{ColorDict, Iterable, PRankSelect};

/// Errors signalled by the data structures in this crate.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: u64 },
    #[error("undefined for input {0}")]
    Undefined(&'static str),
    #[error("precondition violated: {0}")]
    Precondition(&'static str),
    #[error("malformed input: {0}")]
    Malformed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(what: &'static str, value: u64, lo: u64, hi: u64) -> Result<()> {
    if value < lo || value > hi {
        Err(Error::OutOfRange { what, value })
    } else {
        Ok(())
    }
}

/// `ceil(log2(x))` for `x >= 1`, and 0 for `x <= 1`.
pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Number of bits needed to store values in `0..=x`.
pub fn bits_for(x: u64) -> u32 {
    64 - x.leading_zeros()
}
