//! Naive reference models and a trace-replay harness.
//!
//! A [`Trace`] is a configuration plus a list of operations. It replays in
//! lock-step against a plain model (a color array, a multiset, a prefix
//! array); deterministic results must agree exactly, nondeterministic ones
//! (choice, p-select, extraction, iteration order) are checked against
//! their contracts. A divergence is shrunk before it is reported.
//!
//! Trace files are line oriented. `#` starts a comment line. The first
//! line names the configuration, one of
//!
//! ```text
//! dict <n> <c>
//! pool <n>
//! prefix <n> <b> <delta> <fill> <last>
//! ```
//!
//! optionally followed by `seed <s>`, then one operation per line:
//!
//! ```text
//! color l | set j l | choice j | size j | rank l | select j k
//! init j | more j | next j | succ j l | pred j l
//! insert l | extract | pick | pinit | pmore | pnext
//! sum j | value j | search x | update j d
//! ```

use crate::atomic::AtomicChoiceDict;
use crate::dense::DenseChoiceDict;
use crate::nonsys::NonsysChoiceDict;
use crate::pool::Pool;
use crate::prefixsums::SearchablePrefixSums;
use crate::ranksel::ColorWeightIndex;
use crate::space::SpaceUsage;
use crate::traits::{ColorDict, Iterable, PRankSelect, Successor};
use crate::trie::{MultiColorTrie, SystematicChoiceDict};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Config {
    Dict { n: usize, c: usize },
    Pool { n: u64 },
    Prefix { n: usize, b: u32, delta: u32, fill: u64, last: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Color(usize),
    SetColor(usize, usize),
    Choice(usize),
    Size(usize),
    Rank(usize),
    Select(usize, usize),
    IterInit(usize),
    IterMore(usize),
    IterNext(usize),
    Succ(usize, usize),
    Pred(usize, usize),
    Insert(u64),
    Extract,
    Pick,
    PoolInit,
    PoolMore,
    PoolNext,
    Sum(usize),
    Value(usize),
    Search(u64),
    Update(usize, i64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub seed: u64,
    pub config: Config,
    pub ops: Vec<Op>,
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Op::Color(l) => write!(f, "color {l}"),
            Op::SetColor(j, l) => write!(f, "set {j} {l}"),
            Op::Choice(j) => write!(f, "choice {j}"),
            Op::Size(j) => write!(f, "size {j}"),
            Op::Rank(l) => write!(f, "rank {l}"),
            Op::Select(j, k) => write!(f, "select {j} {k}"),
            Op::IterInit(j) => write!(f, "init {j}"),
            Op::IterMore(j) => write!(f, "more {j}"),
            Op::IterNext(j) => write!(f, "next {j}"),
            Op::Succ(j, l) => write!(f, "succ {j} {l}"),
            Op::Pred(j, l) => write!(f, "pred {j} {l}"),
            Op::Insert(l) => write!(f, "insert {l}"),
            Op::Extract => write!(f, "extract"),
            Op::Pick => write!(f, "pick"),
            Op::PoolInit => write!(f, "pinit"),
            Op::PoolMore => write!(f, "pmore"),
            Op::PoolNext => write!(f, "pnext"),
            Op::Sum(j) => write!(f, "sum {j}"),
            Op::Value(j) => write!(f, "value {j}"),
            Op::Search(x) => write!(f, "search {x}"),
            Op::Update(j, d) => write!(f, "update {j} {d}"),
        }
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Config::Dict { n, c } => write!(f, "dict {n} {c}"),
            Config::Pool { n } => write!(f, "pool {n}"),
            Config::Prefix { n, b, delta, fill, last } => write!(f, "prefix {n} {b} {delta} {fill} {last}"),
        }
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.config)?;
        writeln!(f, "seed {}", self.seed)?;
        for op in &self.ops {
            writeln!(f, "{op}")?;
        }
        Ok(())
    }
}

fn field<T: FromStr>(words: &[&str], i: usize, line: usize) -> Result<T> {
    let w = words.get(i).ok_or_else(|| Error::Malformed(format!("line {line}: missing argument")))?;
    w.parse().map_err(|_| Error::Malformed(format!("line {line}: bad argument `{w}`")))
}

fn parse_op(words: &[&str], line: usize) -> Result<Op> {
    let a = |i| field::<usize>(words, i, line);
    let arity = |k: usize| {
        if words.len() == k + 1 {
            Ok(())
        } else {
            Err(Error::Malformed(format!("line {line}: `{}` takes {k} arguments", words[0])))
        }
    };
    let op = match words[0] {
        "color" => Op::Color(a(1)?),
        "set" => Op::SetColor(a(1)?, a(2)?),
        "choice" => Op::Choice(a(1)?),
        "size" => Op::Size(a(1)?),
        "rank" => Op::Rank(a(1)?),
        "select" => Op::Select(a(1)?, a(2)?),
        "init" => Op::IterInit(a(1)?),
        "more" => Op::IterMore(a(1)?),
        "next" => Op::IterNext(a(1)?),
        "succ" => Op::Succ(a(1)?, a(2)?),
        "pred" => Op::Pred(a(1)?, a(2)?),
        "insert" => Op::Insert(field(words, 1, line)?),
        "extract" => Op::Extract,
        "pick" => Op::Pick,
        "pinit" => Op::PoolInit,
        "pmore" => Op::PoolMore,
        "pnext" => Op::PoolNext,
        "sum" => Op::Sum(a(1)?),
        "value" => Op::Value(a(1)?),
        "search" => Op::Search(field(words, 1, line)?),
        "update" => Op::Update(a(1)?, field(words, 2, line)?),
        w => return Err(Error::Malformed(format!("line {line}: unknown operation `{w}`"))),
    };
    let k = match op {
        Op::Extract | Op::Pick | Op::PoolInit | Op::PoolMore | Op::PoolNext => 0,
        Op::SetColor(..) | Op::Select(..) | Op::Succ(..) | Op::Pred(..) | Op::Update(..) => 2,
        _ => 1,
    };
    arity(k)?;
    Ok(op)
}

impl FromStr for Trace {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or_else(|| Error::Malformed("empty trace".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let config = match (h[0], h.len()) {
            ("dict", 3) => Config::Dict { n: field(&h, 1, hl)?, c: field(&h, 2, hl)? },
            ("pool", 2) => Config::Pool { n: field(&h, 1, hl)? },
            ("prefix", 6) => Config::Prefix {
                n: field(&h, 1, hl)?,
                b: field(&h, 2, hl)?,
                delta: field(&h, 3, hl)?,
                fill: field(&h, 4, hl)?,
                last: field(&h, 5, hl)?,
            },
            _ => return Err(Error::Malformed(format!("line {hl}: bad configuration line"))),
        };
        let mut seed = 0;
        let mut ops = Vec::new();
        for (ln, l) in lines {
            let words: Vec<&str> = l.split_whitespace().collect();
            if words[0] == "seed" && ops.is_empty() {
                seed = field(&words, 1, ln)?;
            } else {
                ops.push(parse_op(&words, ln)?);
            }
        }
        Ok(Trace { seed, config, ops })
    }
}

/// A dictionary under test, with whichever optional interfaces it offers.
pub trait DictSubject: ColorDict + SpaceUsage + Send {
    fn ranks(&self) -> Option<&dyn PRankSelect> {
        None
    }
    fn iteration(&mut self) -> Option<&mut dyn Iterable> {
        None
    }
    fn ordered(&self) -> Option<&dyn Successor> {
        None
    }
}

impl DictSubject for DenseChoiceDict {
    fn ranks(&self) -> Option<&dyn PRankSelect> {
        Some(self)
    }
    fn iteration(&mut self) -> Option<&mut dyn Iterable> {
        Some(self)
    }
}

impl DictSubject for AtomicChoiceDict {
    fn iteration(&mut self) -> Option<&mut dyn Iterable> {
        Some(self)
    }
    fn ordered(&self) -> Option<&dyn Successor> {
        Some(self)
    }
}

impl DictSubject for SystematicChoiceDict {
    fn iteration(&mut self) -> Option<&mut dyn Iterable> {
        Some(self)
    }
}

impl DictSubject for MultiColorTrie {
    fn iteration(&mut self) -> Option<&mut dyn Iterable> {
        Some(self)
    }
}

impl DictSubject for NonsysChoiceDict {
    fn iteration(&mut self) -> Option<&mut dyn Iterable> {
        Some(self)
    }
}

impl DictSubject for ColorWeightIndex {
    fn ranks(&self) -> Option<&dyn PRankSelect> {
        Some(self)
    }
    fn iteration(&mut self) -> Option<&mut dyn Iterable> {
        Some(self)
    }
}

/// The dictionary backends, by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Backend {
    Dense,
    Atomic,
    /// The systematic trie for two colors, the multi-color trie otherwise.
    Systematic,
    Nonsys,
    Ranksel,
}

impl Backend {
    pub const ALL: [Backend; 5] = [Backend::Dense, Backend::Atomic, Backend::Systematic, Backend::Nonsys, Backend::Ranksel];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Dense => "dense",
            Backend::Atomic => "atomic",
            Backend::Systematic => "systematic",
            Backend::Nonsys => "nonsys",
            Backend::Ranksel => "ranksel",
        }
    }

    /// Whether the backend takes `c` colors.
    pub fn supports(self, c: usize) -> bool {
        match self {
            Backend::Nonsys => c.is_power_of_two() && c <= 16,
            _ => c >= 1,
        }
    }

    pub fn build(self, n: usize, c: usize, t: u32) -> Result<Box<dyn DictSubject>> {
        if c == 0 {
            return Err(Error::OutOfRange { what: "colors", value: 0 });
        }
        Ok(match self {
            Backend::Dense => Box::new(DenseChoiceDict::new(n, c)),
            Backend::Atomic => Box::new(AtomicChoiceDict::new(n, c)),
            Backend::Systematic if c == 2 => Box::new(SystematicChoiceDict::new(n, t)),
            Backend::Systematic => Box::new(MultiColorTrie::new(n, c, t)),
            Backend::Nonsys => Box::new(NonsysChoiceDict::new(n, c, t as usize)?),
            Backend::Ranksel => Box::new(ColorWeightIndex::new(n, c, t)?),
        })
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Backend::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Malformed(format!("unknown backend `{s}`")))
    }
}

/// Something a trace can run against.
pub enum Target {
    Dict(Box<dyn DictSubject>),
    Pool(Pool),
    Prefix(SearchablePrefixSums),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub step: usize,
    pub op: Op,
    pub detail: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "step {} (`{}`): {}", self.step, self.op, self.detail)
    }
}

/// A divergence together with the shortest failing trace found.
#[derive(Clone, Debug)]
pub struct Failure {
    pub divergence: Divergence,
    pub minimized: Trace,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.divergence)?;
        writeln!(f, "minimized trace ({} ops):", self.minimized.ops.len())?;
        write!(f, "{}", self.minimized)
    }
}

type Check = std::result::Result<(), String>;

fn agree<T: PartialEq + fmt::Debug>(what: &str, got: Result<T>, want: Option<T>) -> std::result::Result<Option<T>, String> {
    match (got, want) {
        (Ok(g), Some(w)) if g == w => Ok(Some(g)),
        (Ok(g), Some(w)) => Err(format!("{what}: got {g:?}, expected {w:?}")),
        (Err(_), None) => Ok(None),
        (Ok(g), None) => Err(format!("{what}: got {g:?}, expected an error")),
        (Err(e), Some(w)) => Err(format!("{what}: error `{e}`, expected {w:?}")),
    }
}

/// Single active iteration over one color (or the pool).
struct IterState {
    j: usize,
    // Present since init and never recolored away.
    steady: Vec<bool>,
    returned: Vec<bool>,
}

/// Plain color array with per-color ordered sets.
struct DictModel {
    n: usize,
    c: usize,
    color: Vec<u8>,
    sets: Vec<BTreeSet<usize>>,
    rank_of: HashMap<usize, usize>,
    select: HashMap<(usize, usize), usize>,
    it: Option<IterState>,
}

impl DictModel {
    fn new(n: usize, c: usize) -> Self {
        let mut sets = vec![BTreeSet::new(); c.max(1)];
        sets[0] = (1..=n).collect();
        DictModel { n, c, color: vec![0; n + 1], sets, rank_of: HashMap::new(), select: HashMap::new(), it: None }
    }

    fn elem(&self, l: usize) -> bool {
        (1..=self.n).contains(&l)
    }

    fn col(&self, j: usize) -> bool {
        j < self.c
    }

    fn finish(&mut self) -> Check {
        let it = self.it.take().unwrap();
        match (1..=self.n).find(|&x| it.steady[x] && !it.returned[x]) {
            Some(x) => Err(format!("iteration over color {} ended without {x}", it.j)),
            None => Ok(()),
        }
    }

    fn step(&mut self, d: &mut dyn DictSubject, op: Op) -> Check {
        match op {
            Op::Color(l) => {
                agree("color", d.color(l), self.elem(l).then(|| self.color[l] as usize))?;
            }
            Op::SetColor(j, l) => {
                let ok = self.elem(l) && self.col(j);
                agree("setcolor", d.setcolor(j, l), ok.then_some(()))?;
                if ok {
                    let old = self.color[l] as usize;
                    if old != j {
                        self.sets[old].remove(&l);
                        self.sets[j].insert(l);
                        self.color[l] = j as u8;
                        if let Some(it) = self.it.as_mut().filter(|it| it.j == old) {
                            it.steady[l] = false;
                        }
                    }
                    self.rank_of.clear();
                    self.select.clear();
                }
            }
            Op::Choice(j) => {
                if !self.col(j) {
                    agree("choice", d.choice(j), None)?;
                    return Ok(());
                }
                let x = d.choice(j).map_err(|e| format!("choice({j}): {e}"))?;
                if self.sets[j].is_empty() {
                    if x != 0 {
                        return Err(format!("choice({j}) = {x} from an empty class"));
                    }
                } else if !self.elem(x) || self.color[x] as usize != j {
                    return Err(format!("choice({j}) = {x} is not in the class"));
                }
            }
            Op::Size(j) => {
                agree("size", d.size(j), self.col(j).then(|| self.sets[j].len()))?;
            }
            Op::Rank(l) => {
                let Some(r) = d.ranks() else { return Ok(()) };
                if !self.elem(l) {
                    agree("p-rank", r.p_rank(l), None)?;
                    return Ok(());
                }
                let k = r.p_rank(l).map_err(|e| format!("p-rank({l}): {e}"))?;
                let j = self.color[l] as usize;
                if !(1..=self.sets[j].len()).contains(&k) {
                    return Err(format!("p-rank({l}) = {k} outside 1..={}", self.sets[j].len()));
                }
                self.bind(j, k, l)?;
            }
            Op::Select(j, k) => {
                let Some(r) = d.ranks() else { return Ok(()) };
                if !self.col(j) {
                    agree("p-select", r.p_select(j, k), None)?;
                    return Ok(());
                }
                if k == 0 {
                    return Ok(());
                }
                let x = r.p_select(j, k).map_err(|e| format!("p-select({j}, {k}): {e}"))?;
                if k > self.sets[j].len() {
                    if x != 0 {
                        return Err(format!("p-select({j}, {k}) = {x} beyond the class size"));
                    }
                    return Ok(());
                }
                if !self.elem(x) || self.color[x] as usize != j {
                    return Err(format!("p-select({j}, {k}) = {x} is not in the class"));
                }
                self.bind(j, k, x)?;
            }
            Op::IterInit(j) => {
                let Some(i) = d.iteration() else { return Ok(()) };
                let ok = self.col(j);
                agree("iter-init", i.iter_init(j), ok.then_some(()))?;
                if ok {
                    let mut steady = vec![false; self.n + 1];
                    for &x in &self.sets[j] {
                        steady[x] = true;
                    }
                    self.it = Some(IterState { j, steady, returned: vec![false; self.n + 1] });
                }
            }
            Op::IterMore(j) => {
                if self.it.as_ref().is_none_or(|it| it.j != j) {
                    return Ok(());
                }
                let Some(i) = d.iteration() else { return Ok(()) };
                let more = i.iter_more(j).map_err(|e| format!("iter-more: {e}"))?;
                if !more {
                    self.finish()?;
                }
            }
            Op::IterNext(j) => {
                if self.it.as_ref().is_none_or(|it| it.j != j) {
                    return Ok(());
                }
                let Some(i) = d.iteration() else { return Ok(()) };
                let x = i.iter_next(j).map_err(|e| format!("iter-next: {e}"))?;
                if x == 0 {
                    self.finish()?;
                } else {
                    if !self.elem(x) || self.color[x] as usize != j {
                        return Err(format!("iteration returned {x}, not in color {j}"));
                    }
                    let it = self.it.as_mut().unwrap();
                    if std::mem::replace(&mut it.returned[x], true) {
                        return Err(format!("iteration returned {x} twice"));
                    }
                }
            }
            Op::Succ(j, l) => {
                let Some(s) = d.ordered() else { return Ok(()) };
                let ok = self.col(j) && l <= self.n;
                let want = ok.then(|| self.sets[j].range(l + 1..).next().copied().unwrap_or(0));
                agree("successor", s.successor(j, l), want)?;
            }
            Op::Pred(j, l) => {
                let Some(s) = d.ordered() else { return Ok(()) };
                let ok = self.col(j) && (1..=self.n + 1).contains(&l);
                let want = ok.then(|| self.sets[j].range(..l).next_back().copied().unwrap_or(0));
                agree("predecessor", s.predecessor(j, l), want)?;
            }
            _ => return Err(format!("`{op}` is not a dictionary operation")),
        }
        Ok(())
    }

    /// Records `k <-> x` in color `j` and checks it against earlier answers
    /// since the last recoloring.
    fn bind(&mut self, j: usize, k: usize, x: usize) -> Check {
        if let Some(&y) = self.select.get(&(j, k)) {
            if y != x {
                return Err(format!("rank {k} of color {j} maps to both {y} and {x}"));
            }
        }
        if let Some(&q) = self.rank_of.get(&x) {
            if q != k {
                return Err(format!("element {x} has ranks {q} and {k}"));
            }
        }
        self.select.insert((j, k), x);
        self.rank_of.insert(x, k);
        Ok(())
    }
}

struct PoolIter {
    start: BTreeMap<u64, usize>,
    touched: BTreeSet<u64>,
    seen: BTreeMap<u64, usize>,
}

/// Plain multiset.
struct PoolModel {
    n: u64,
    items: BTreeMap<u64, usize>,
    len: u64,
    it: Option<PoolIter>,
}

impl PoolModel {
    fn remove(&mut self, x: u64) -> bool {
        match self.items.get_mut(&x) {
            Some(k) => {
                *k -= 1;
                if *k == 0 {
                    self.items.remove(&x);
                }
                self.len -= 1;
                if let Some(it) = &mut self.it {
                    it.touched.insert(x);
                }
                true
            }
            None => false,
        }
    }

    fn finish(&mut self) -> Check {
        let it = self.it.take().unwrap();
        for (x, &c) in &it.start {
            if !it.touched.contains(x) && it.seen.get(x).copied().unwrap_or(0) != c {
                return Err(format!("pool iteration ended with copies of {x} missing"));
            }
        }
        Ok(())
    }

    fn step(&mut self, p: &mut Pool, op: Op) -> Check {
        match op {
            Op::Insert(l) => {
                let ok = (1..=self.n).contains(&l);
                agree("insert", p.insert(l), ok.then_some(()))?;
                if ok {
                    *self.items.entry(l).or_insert(0) += 1;
                    self.len += 1;
                    if let Some(it) = &mut self.it {
                        it.touched.insert(l);
                    }
                }
            }
            Op::Extract => {
                let x = p.extract_choice();
                if self.len == 0 {
                    if x != 0 {
                        return Err(format!("extract gave {x} from an empty pool"));
                    }
                } else if !self.remove(x) {
                    return Err(format!("extract gave {x}, which is not present"));
                }
            }
            Op::Pick => {
                let x = p.choice();
                if (x == 0) != (self.len == 0) || (x != 0 && !self.items.contains_key(&x)) {
                    return Err(format!("choice gave {x} with {} elements present", self.len));
                }
            }
            Op::PoolInit => {
                p.iter_init();
                self.it = Some(PoolIter { start: self.items.clone(), touched: BTreeSet::new(), seen: BTreeMap::new() });
            }
            Op::PoolMore => {
                if self.it.is_some() && !p.iter_more() {
                    self.finish()?;
                }
            }
            Op::PoolNext => {
                let Some(it) = &mut self.it else { return Ok(()) };
                let x = p.iter_next();
                if x == 0 {
                    return self.finish();
                }
                if !self.items.contains_key(&x) {
                    return Err(format!("pool iteration returned absent {x}"));
                }
                let s = it.seen.entry(x).or_insert(0);
                *s += 1;
                if *s > it.start.get(&x).copied().unwrap_or(0) {
                    return Err(format!("pool iteration returned {x} too often"));
                }
            }
            _ => return Err(format!("`{op}` is not a pool operation")),
        }
        if p.len() != self.len {
            return Err(format!("pool size {} but {} elements present", p.len(), self.len));
        }
        Ok(())
    }
}

/// Plain array with a Fenwick tree for its prefix sums.
struct PrefixModel {
    a: Vec<u64>,
    fen: Vec<u64>,
    b: u32,
    delta: u32,
}

impl PrefixModel {
    fn new(n: usize, b: u32, delta: u32, fill: u64, last: u64) -> Self {
        let mut m = PrefixModel { a: vec![0; n + 1], fen: vec![0; n + 1], b, delta };
        for j in 1..=n {
            m.add(j, if j == n { last } else { fill } as i64);
        }
        m
    }

    fn n(&self) -> usize {
        self.a.len() - 1
    }

    fn add(&mut self, j: usize, d: i64) {
        self.a[j] = self.a[j].wrapping_add_signed(d);
        let mut i = j;
        while i < self.fen.len() {
            self.fen[i] = self.fen[i].wrapping_add_signed(d);
            i += i & i.wrapping_neg();
        }
    }

    fn sum(&self, mut j: usize) -> u64 {
        let mut s = 0u64;
        while j > 0 {
            s = s.wrapping_add(self.fen[j]);
            j &= j - 1;
        }
        s
    }

    fn search(&self, x: u64) -> usize {
        let n = self.n();
        let mut pos = 0;
        let mut rem = x;
        let mut step = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        while step > 0 {
            if pos + step <= n && self.fen[pos + step] < rem {
                pos += step;
                rem -= self.fen[pos];
            }
            step >>= 1;
        }
        pos + 1
    }

    fn max(&self) -> u64 {
        if self.b == 64 {
            u64::MAX
        } else {
            (1 << self.b) - 1
        }
    }

    /// Whether `update(j, d)` is legal.
    fn legal(&self, j: usize, d: i64) -> bool {
        (1..=self.n()).contains(&j)
            && d.unsigned_abs() >> self.delta == 0
            && self.a[j] as i128 + d as i128 >= 0
            && (self.sum(self.n()) as i128 + d as i128) <= self.max() as i128
    }

    fn step(&mut self, p: &mut SearchablePrefixSums, op: Op) -> Check {
        let n = self.n();
        match op {
            Op::Sum(j) => {
                agree("sum", p.sum(j), (j <= n).then(|| self.sum(j)))?;
            }
            Op::Value(j) => {
                agree("value", p.value(j), (1..=n).contains(&j).then(|| self.a[j]))?;
            }
            Op::Search(x) => {
                agree("search", p.search(x), (1..=self.max()).contains(&x).then(|| self.search(x)))?;
            }
            Op::Update(j, d) => {
                let ok = self.legal(j, d);
                agree("update", p.update(j, d), ok.then_some(()))?;
                if ok {
                    self.add(j, d);
                }
            }
            _ => return Err(format!("`{op}` is not a prefix-sum operation")),
        }
        Ok(())
    }
}

/// Runs `trace` against `target` in lock-step with the naive model and
/// returns the first divergence.
pub fn replay_compare(trace: &Trace, target: &mut Target) -> std::result::Result<(), Divergence> {
    let fail = |step: usize, op: Op, detail: String| Divergence { step, op, detail };
    match (trace.config, target) {
        (Config::Dict { n, c }, Target::Dict(d)) => {
            if d.universe() != n || d.num_colors() != c {
                return Err(fail(0, Op::Size(0), "target does not match the trace configuration".into()));
            }
            let mut m = DictModel::new(n, c);
            for (i, &op) in trace.ops.iter().enumerate() {
                m.step(d.as_mut(), op).map_err(|e| fail(i, op, e))?;
            }
        }
        (Config::Pool { n }, Target::Pool(p)) => {
            let mut m = PoolModel { n, items: BTreeMap::new(), len: 0, it: None };
            for (i, &op) in trace.ops.iter().enumerate() {
                m.step(p, op).map_err(|e| fail(i, op, e))?;
            }
        }
        (Config::Prefix { n, b, delta, fill, last }, Target::Prefix(p)) => {
            let mut m = PrefixModel::new(n, b, delta, fill, last);
            for (i, &op) in trace.ops.iter().enumerate() {
                m.step(p, op).map_err(|e| fail(i, op, e))?;
            }
        }
        _ => return Err(fail(0, Op::Size(0), "target kind does not match the trace".into())),
    }
    Ok(())
}

/// Replays `trace` on a fresh target; on divergence, shrinks the trace by
/// deleting ever smaller blocks of operations while it still fails.
pub fn check(trace: &Trace, fresh: &dyn Fn() -> Target) -> std::result::Result<(), Failure> {
    let run = |ops: &[Op]| {
        let t = Trace { seed: trace.seed, config: trace.config, ops: ops.to_vec() };
        replay_compare(&t, &mut fresh()).err()
    };
    let Some(mut div) = replay_compare(trace, &mut fresh()).err() else {
        return Ok(());
    };
    let mut ops = trace.ops[..=div.step].to_vec();
    // Bound on replayed operations spent shrinking.
    let mut budget: usize = 20_000_000;
    let mut chunk = ops.len().div_ceil(2);
    while chunk >= 1 && budget > 0 {
        let mut i = 0;
        let mut progress = false;
        while i < ops.len() && budget > 0 {
            let mut cand = ops[..i].to_vec();
            cand.extend_from_slice(&ops[(i + chunk).min(ops.len())..]);
            budget = budget.saturating_sub(cand.len() + 1);
            match run(&cand) {
                Some(d) => {
                    cand.truncate(d.step + 1);
                    ops = cand;
                    div = d;
                    progress = true;
                }
                None => i += chunk,
            }
        }
        if !progress {
            chunk /= 2;
        }
    }
    Err(Failure { divergence: div, minimized: Trace { seed: trace.seed, config: trace.config, ops } })
}

/// Which optional dictionary operations a generated trace exercises.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Caps {
    pub ranks: bool,
    pub iteration: bool,
    pub ordered: bool,
}

impl Caps {
    pub fn of(d: &mut dyn DictSubject) -> Caps {
        Caps { ranks: d.ranks().is_some(), ordered: d.ordered().is_some(), iteration: d.iteration().is_some() }
    }
}

/// Random dictionary trace. Recoloring favors one color per phase and
/// sometimes a narrow window of elements, so classes range from empty to
/// full; iteration sessions run to completion most of the time.
pub fn dict_trace(n: usize, c: usize, len: usize, seed: u64, caps: Caps) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ops = Vec::with_capacity(len);
    let mut favored = 0;
    let mut bias = 0.8;
    let mut window = (1, n);
    let mut session: Option<usize> = None;
    let mut size = vec![0usize; c];
    size[0] = n;
    let mut color = vec![0u8; n + 1];
    while ops.len() < len {
        if ops.len() % 5000 == 0 {
            favored = rng.gen_range(0..c);
            bias = [0.8, 0.97, 1.0][rng.gen_range(0..3)];
            let w = rng.gen_range(1..=n);
            let lo = rng.gen_range(1..=n + 1 - w);
            window = (lo, lo + w - 1);
        }
        let l = if rng.gen_bool(0.7) { rng.gen_range(window.0..=window.1) } else { rng.gen_range(1..=n) };
        let j = if rng.gen_bool(bias) { favored } else { rng.gen_range(0..c) };
        if let Some(sj) = session {
            if rng.gen_bool(0.35) {
                ops.push(if rng.gen_bool(0.9) { Op::IterNext(sj) } else { Op::IterMore(sj) });
                // Sessions end once the class could have been listed.
                if rng.gen_ratio(1, (2 * size[sj] as u32).max(8)) {
                    session = None;
                }
                continue;
            }
        } else if caps.iteration && rng.gen_ratio(1, 200 + n as u32 / 4) {
            let sj = rng.gen_range(0..c);
            session = Some(sj);
            ops.push(Op::IterInit(sj));
            continue;
        }
        let r = rng.gen_range(0..100);
        let op = match r {
            0..=44 => {
                size[color[l] as usize] -= 1;
                size[j] += 1;
                color[l] = j as u8;
                Op::SetColor(j, l)
            }
            45..=59 => Op::Color(l),
            60..=71 => Op::Choice(j),
            72..=76 => Op::Size(j),
            77..=86 if caps.ranks => {
                if rng.gen_bool(0.5) {
                    Op::Rank(l)
                } else {
                    Op::Select(j, rng.gen_range(1..=size[j] + 1))
                }
            }
            87..=99 if caps.ordered => {
                if rng.gen_bool(0.5) {
                    Op::Succ(j, rng.gen_range(0..=n))
                } else {
                    Op::Pred(j, rng.gen_range(1..=n + 1))
                }
            }
            _ => Op::Choice(j),
        };
        ops.push(op);
    }
    Trace { seed, config: Config::Dict { n, c }, ops }
}

/// One iteration over a random color interleaved with recolorings, with
/// enough `next` calls to run it out.
pub fn iteration_trace(n: usize, c: usize, seed: u64) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ops = Vec::new();
    let pick = |rng: &mut ChaCha8Rng| Op::SetColor(rng.gen_range(0..c), rng.gen_range(1..=n));
    for _ in 0..rng.gen_range(0..2 * n + 1) {
        ops.push(pick(&mut rng));
    }
    let j = rng.gen_range(0..c);
    ops.push(Op::IterInit(j));
    let churn = rng.gen_range(0.0..0.7);
    let mut nexts = 0;
    while nexts <= n {
        if rng.gen_bool(churn) {
            ops.push(pick(&mut rng));
        } else if rng.gen_bool(0.2) {
            ops.push(Op::IterMore(j));
        } else {
            ops.push(Op::IterNext(j));
            nexts += 1;
        }
    }
    Trace { seed, config: Config::Dict { n, c }, ops }
}

/// Pool counterpart of [`iteration_trace`].
pub fn pool_iteration_trace(n: u64, seed: u64) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ops = Vec::new();
    let start = rng.gen_range(0..3 * n as usize + 1);
    for _ in 0..start {
        ops.push(Op::Insert(rng.gen_range(1..=n)));
    }
    ops.push(Op::PoolInit);
    let churn = rng.gen_range(0.0..0.7);
    let mut nexts = 0;
    while nexts <= start {
        if rng.gen_bool(churn) {
            ops.push(if rng.gen_bool(0.5) { Op::Insert(rng.gen_range(1..=n)) } else { Op::Extract });
        } else if rng.gen_bool(0.2) {
            ops.push(Op::PoolMore);
        } else {
            ops.push(Op::PoolNext);
            nexts += 1;
        }
    }
    Trace { seed, config: Config::Pool { n }, ops }
}

/// Random pool trace: growth and drain phases of varied length, with
/// iteration sessions.
pub fn pool_trace(n: u64, len: usize, seed: u64) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ops = Vec::with_capacity(len);
    let mut grow = 0.6;
    let mut size = 0u64;
    let mut session = false;
    while ops.len() < len {
        if rng.gen_ratio(1, 3000) {
            grow = rng.gen_range(0.2..0.8);
        }
        if session && rng.gen_bool(0.4) {
            ops.push(if rng.gen_bool(0.9) { Op::PoolNext } else { Op::PoolMore });
            if rng.gen_ratio(1, (2 * size as u32).max(8)) {
                session = false;
            }
            continue;
        }
        if !session && rng.gen_ratio(1, 500) {
            session = true;
            ops.push(Op::PoolInit);
            continue;
        }
        let op = if rng.gen_bool(grow) {
            size += 1;
            Op::Insert(rng.gen_range(1..=n))
        } else if rng.gen_bool(0.9) {
            size = size.saturating_sub(1);
            Op::Extract
        } else {
            Op::Pick
        };
        ops.push(op);
    }
    Trace { seed, config: Config::Pool { n }, ops }
}

/// Random prefix-sum trace. Updates stay legal; some stretches hammer a
/// single index with extreme updates, which straddles the structure's
/// internal rebuilding points.
pub fn prefix_trace(n: usize, b: u32, delta: u32, len: usize, seed: u64) -> Trace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fill, last) = (0, 0);
    let mut m = PrefixModel::new(n, b, delta, fill, last);
    let dmax = ((1u128 << delta) - 1).min(i64::MAX as u128) as i64;
    let mut ops = Vec::with_capacity(len);
    let mut hammer: Option<(usize, usize)> = None;
    while ops.len() < len {
        if hammer.is_none() && rng.gen_ratio(1, 2000) {
            hammer = Some((rng.gen_range(1..=n), rng.gen_range(10..4 * n.min(10_000) + 20)));
        }
        let r = rng.gen_range(0..100);
        if r < 50 || hammer.is_some() && r < 80 {
            let (j, d) = match &mut hammer {
                Some((j, left)) => {
                    *left -= 1;
                    let j = *j;
                    if *left == 0 {
                        hammer = None;
                    }
                    (j, if rng.gen_bool(0.5) { dmax } else { -dmax })
                }
                None => (rng.gen_range(1..=n), rng.gen_range(-dmax..=dmax)),
            };
            // Clamp into the legal range so the trace keeps moving.
            let lo = -(m.a[j].min(dmax as u64) as i64);
            let room = m.max() - m.sum(n);
            let hi = room.min(dmax as u64) as i64;
            let d = d.clamp(lo, hi);
            m.add(j, d);
            ops.push(Op::Update(j, d));
        } else if r < 70 {
            ops.push(Op::Sum(rng.gen_range(0..=n)));
        } else if r < 80 {
            ops.push(Op::Value(rng.gen_range(1..=n)));
        } else {
            let total = m.sum(n);
            let x = if total > 0 && rng.gen_bool(0.9) { rng.gen_range(1..=total) } else { rng.gen_range(1..=m.max()) };
            ops.push(Op::Search(x));
        }
    }
    Trace { seed, config: Config::Prefix { n, b, delta, fill, last }, ops }
}

/// Two-color dictionary kept as a bit vector with a summary of nonzero
/// words. With `broken` set, clearing the last bit of a word leaves its
/// summary bit on. Used to confirm the harness catches such bugs.
pub struct SummaryMutant {
    n: usize,
    bits: Vec<u64>,
    summary: Vec<u64>,
    ones: usize,
    broken: bool,
}

impl SummaryMutant {
    pub fn new(n: usize, broken: bool) -> Self {
        let w = n.div_ceil(64);
        SummaryMutant { n, bits: vec![0; w], summary: vec![0; w.div_ceil(64)], ones: 0, broken }
    }
}

impl ColorDict for SummaryMutant {
    fn universe(&self) -> usize {
        self.n
    }

    fn num_colors(&self) -> usize {
        2
    }

    fn color(&self, l: usize) -> Result<usize> {
        crate::check_range("element", l as u64, 1, self.n as u64)?;
        Ok((self.bits[(l - 1) / 64] >> ((l - 1) % 64) & 1) as usize)
    }

    fn setcolor(&mut self, j: usize, l: usize) -> Result<()> {
        crate::check_range("color", j as u64, 0, 1)?;
        if self.color(l)? == j {
            return Ok(());
        }
        let w = (l - 1) / 64;
        self.bits[w] ^= 1 << ((l - 1) % 64);
        if j == 1 {
            self.ones += 1;
            self.summary[w / 64] |= 1 << (w % 64);
        } else {
            self.ones -= 1;
            if self.bits[w] == 0 && !self.broken {
                self.summary[w / 64] &= !(1 << (w % 64));
            }
        }
        Ok(())
    }

    fn choice(&self, j: usize) -> Result<usize> {
        crate::check_range("color", j as u64, 0, 1)?;
        if j == 0 {
            return Ok((1..=self.n).find(|&l| self.color(l) == Ok(0)).unwrap_or(0));
        }
        let Some((s, &sw)) = self.summary.iter().enumerate().find(|(_, &x)| x != 0) else {
            return Ok(0);
        };
        let w = s * 64 + sw.trailing_zeros() as usize;
        Ok(w * 64 + self.bits[w].trailing_zeros() as usize + 1)
    }

    fn size(&self, j: usize) -> Result<usize> {
        crate::check_range("color", j as u64, 0, 1)?;
        Ok(if j == 1 { self.ones } else { self.n - self.ones })
    }
}

impl SpaceUsage for SummaryMutant {
    fn bits_used(&self) -> u64 {
        64 * (self.bits.len() + self.summary.len() + 2) as u64
    }
}

impl DictSubject for SummaryMutant {}
