use std::io::Write;
use std::path::PathBuf;

use choicedict::graphs::{self, ColorBackend, ForestRecord, Graph, Order};
use clap::ValueEnum;

use crate::Fail;

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    SpanningForest,
    Bfs,
    Clique,
}

#[derive(Clone, Copy, ValueEnum)]
enum Store {
    Nonsys,
    Dense,
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(value_enum)]
    algo: Algo,
    /// Graph file: a line `n m d`, then `m` lines `u v` with 1-based vertices.
    file: PathBuf,
    /// Vertex order: id, rev or seed:K.
    #[arg(long, default_value = "id", value_parser = parse_order)]
    pi: Order,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    t: u32,
    /// Color dictionary behind bfs and clique.
    #[arg(long, value_enum, default_value = "nonsys")]
    store: Store,
}

fn parse_order(s: &str) -> Result<Order, String> {
    match s {
        "id" => Ok(Order::Identity),
        "rev" => Ok(Order::Reverse),
        _ => s
            .strip_prefix("seed:")
            .and_then(|k| k.parse().ok())
            .map(Order::Seeded)
            .ok_or_else(|| format!("expected id, rev or seed:K, got `{s}`")),
    }
}

pub fn run(a: &Args, out: &mut impl Write) -> Result<(), Fail> {
    let text = std::fs::read_to_string(&a.file).map_err(|e| Fail::Input(format!("{}: {e}", a.file.display())))?;
    let g = Graph::parse(&text).map_err(|e| Fail::Input(format!("{}: {e}", a.file.display())))?;
    let t = a.t as usize;
    let store = match a.store {
        Store::Nonsys => ColorBackend::Nonsys,
        Store::Dense => ColorBackend::Dense,
    };
    let mut res = Ok(());
    let mut record = |r: ForestRecord| {
        if res.is_ok() {
            res = match r.depth {
                Some(d) => writeln!(out, "{}\t{}\t{}\t{d}", r.parent, r.vertex, r.tree),
                None => writeln!(out, "{}\t{}\t{}", r.parent, r.vertex, r.tree),
            };
        }
    };
    let report = match a.algo {
        Algo::SpanningForest => graphs::spanning_forest(&g, a.pi, t, &mut record)?,
        Algo::Bfs => graphs::bfs_forest(&g, a.pi, t, store, &mut record)?,
        Algo::Clique => graphs::maximal_clique(&g, t, store, |v| {
            if res.is_ok() {
                res = writeln!(out, "{v}");
            }
        })?,
    };
    res?;
    writeln!(out, "# peak_bits={} n={} m={} sweeps={}", report.peak_bits, g.n(), g.m(), report.sweeps)?;
    Ok(())
}
