//! Space accounting.
//!
//! Every structure reports the capacity of its live allocations rounded up
//! to whole 64-bit words. Read-only inputs and output streams are not
//! charged. A [`SpaceMeter`] aggregates named components and tracks the
//! peak of their sum.

use std::cell::Cell;
use std::collections::BTreeMap;

/// Bits of working memory held by a structure.
pub trait SpaceUsage {
    fn bits_used(&self) -> u64;
}

/// Bits charged for `n` payload bits stored in whole words.
pub fn word_bits(n: u64) -> u64 {
    n.div_ceil(64) * 64
}

impl SpaceUsage for Vec<u64> {
    fn bits_used(&self) -> u64 {
        self.len() as u64 * 64
    }
}

#[derive(Clone, Debug, Default)]
pub struct SpaceMeter {
    parts: BTreeMap<&'static str, u64>,
    current: u64,
    peak: u64,
}

impl SpaceMeter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the current size of component `name` (already word-rounded).
    pub fn record(&mut self, name: &'static str, bits: u64) {
        let old = self.parts.insert(name, word_bits(bits)).unwrap_or(0);
        self.current = self.current - old + word_bits(bits);
        self.peak = self.peak.max(self.current);
    }

    pub fn release(&mut self, name: &'static str) {
        if let Some(old) = self.parts.remove(name) {
            self.current -= old;
        }
    }

    pub fn current(&self) -> u64 {
        self.current
    }

    pub fn peak(&self) -> u64 {
        self.peak
    }

    pub fn parts(&self) -> impl Iterator<Item = (&'static str, u64)> + '_ {
        self.parts.iter().map(|(k, v)| (*k, *v))
    }
}

/// Thread-local counter of memory words inspected, used to instrument the
/// per-operation cost of the systematic dictionary.
pub mod probe {
    use super::Cell;

    thread_local! {
        static WORDS: Cell<u64> = const { Cell::new(0) };
        static ON: Cell<bool> = const { Cell::new(false) };
    }

    #[inline]
    pub fn touch(words: u64) {
        ON.with(|on| {
            if on.get() {
                WORDS.with(|w| w.set(w.get() + words));
            }
        });
    }

    pub fn start() {
        ON.with(|on| on.set(true));
        WORDS.with(|w| w.set(0));
    }

    pub fn stop() -> u64 {
        ON.with(|on| on.set(false));
        WORDS.with(|w| w.get())
    }
}
