use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use choicedict::oracles::{Backend, DictSubject};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Fail;

pub const HEADER: &str = "impl,n,c,t,ops,seed,bits_used,bits_redundancy,ns_per_op_by_kind";

#[derive(clap::Args)]
pub struct Args {
    /// Backends, comma separated: dense, atomic, systematic, nonsys, ranksel.
    #[arg(long = "impl", value_delimiter = ',', required = true, value_parser = parse_backend)]
    imps: Vec<Backend>,
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "2")]
    c: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    t: Vec<u32>,
    #[arg(long, default_value_t = 100_000)]
    ops: u64,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    seed: Vec<u64>,
    /// Worker threads; 0 picks the number of CPUs.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Leave the timing column empty so that the output only depends on the flags.
    #[arg(long)]
    no_timing: bool,
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse().map_err(|e: choicedict::Error| e.to_string())
}

#[derive(Clone, Copy)]
struct Config {
    imp: Backend,
    n: usize,
    c: usize,
    t: u32,
    seed: u64,
}

const KINDS: [&str; 6] = ["color", "set", "choice", "size", "rank", "select"];

pub fn run(a: &Args, out: &mut impl Write) -> Result<(), Fail> {
    let mut configs = Vec::new();
    for &imp in &a.imps {
        for &n in &a.n {
            for &c in &a.c {
                for &t in &a.t {
                    for &seed in &a.seed {
                        if n == 0 || c == 0 || t == 0 {
                            return Err(Fail::Usage("--n, --c and --t must be positive".into()));
                        }
                        if !imp.supports(c) {
                            return Err(Fail::Usage(format!("{} does not take c={c}", imp.name())));
                        }
                        configs.push(Config { imp, n, c, t, seed });
                    }
                }
            }
        }
    }
    let jobs = match a.jobs {
        0 => std::thread::available_parallelism().map_or(1, |j| j.get()),
        j => j,
    };
    let rows: Vec<Mutex<Option<Result<String, Fail>>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.min(configs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&cfg) = configs.get(i) else { break };
                *rows[i].lock().unwrap() = Some(row(cfg, a.ops, !a.no_timing));
            });
        }
    });
    writeln!(out, "{HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.into_inner().unwrap().expect("every configuration ran")?)?;
    }
    Ok(())
}

fn row(cfg: Config, ops: u64, timing: bool) -> Result<String, Fail> {
    let mut d = cfg.imp.build(cfg.n, cfg.c, cfg.t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ns = [0u128; KINDS.len()];
    let mut count = [0u64; KINDS.len()];
    let ranked = d.ranks().is_some();
    for _ in 0..ops {
        let kind = match rng.gen_range(0..100) {
            0..=34 => 0,
            35..=69 => 1,
            70..=89 => 2,
            _ if !ranked => 3,
            90..=94 => 4,
            _ => 5,
        };
        let l = rng.gen_range(1..=cfg.n);
        let j = rng.gen_range(0..cfg.c);
        let start = Instant::now();
        op(&mut *d, kind, j, l)?;
        if timing {
            ns[kind] += start.elapsed().as_nanos();
        }
        count[kind] += 1;
    }
    let bits = d.bits_used();
    let ideal = (cfg.n as f64 * (cfg.c as f64).log2()).ceil() as i64;
    let per_kind = if timing {
        let parts: Vec<String> = (0..KINDS.len())
            .filter(|&k| count[k] > 0)
            .map(|k| format!("{}:{:.1}", KINDS[k], ns[k] as f64 / count[k] as f64))
            .collect();
        parts.join(";")
    } else {
        String::new()
    };
    Ok(format!(
        "{},{},{},{},{},{},{},{},{}",
        cfg.imp.name(),
        cfg.n,
        cfg.c,
        cfg.t,
        ops,
        cfg.seed,
        bits,
        bits as i64 - ideal,
        per_kind
    ))
}

fn op(d: &mut dyn DictSubject, kind: usize, j: usize, l: usize) -> choicedict::Result<()> {
    match kind {
        0 => {
            std::hint::black_box(d.color(l)?);
        }
        1 => d.setcolor(j, l)?,
        2 => {
            std::hint::black_box(d.choice(j)?);
        }
        3 => {
            std::hint::black_box(d.size(j)?);
        }
        4 => {
            std::hint::black_box(d.ranks().unwrap().p_rank(l)?);
        }
        _ => {
            let r = d.ranks().unwrap();
            let k = l % (r.size(j)? + 1);
            std::hint::black_box(r.p_select(j, k.max(1))?);
        }
    }
    Ok(())
}
