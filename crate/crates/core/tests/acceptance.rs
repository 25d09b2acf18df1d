//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Pass criterion numbers (`1 5 8`) to run a subset.

use choicedict::graphs::{self, ColorBackend, ForestRecord, Graph, Order};
use choicedict::nonsys::NonsysChoiceDict;
use choicedict::oracles::{self, Backend, Caps, Target};
use choicedict::pool::Pool;
use choicedict::prefixsums::SearchablePrefixSums;
use choicedict::ranksel::ColorWeightIndex;
use choicedict::space::{probe, SpaceUsage};
use choicedict::trie::SystematicChoiceDict;
use choicedict::{ColorDict, PRankSelect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

type Outcome = Result<String, String>;

/// Runs `jobs` on all cores; returns the error strings.
fn parallel<J: Sync>(jobs: &[J], work: impl Fn(&J) -> Result<(), String> + Sync) -> Vec<String> {
    let next = AtomicUsize::new(0);
    let errors = Mutex::new(Vec::new());
    let workers = std::thread::available_parallelism().map_or(1, |p| p.get());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                if let Err(e) = work(job) {
                    errors.lock().unwrap().push(e);
                }
            });
        }
    });
    errors.into_inner().unwrap()
}

fn first(errors: Vec<String>) -> Result<(), String> {
    match errors.len() {
        0 => Ok(()),
        k => Err(format!("{k} failures; first: {}", errors[0])),
    }
}

const OPS_PER_CONFIG: usize = 1_000_000;

fn oracle_equivalence() -> Outcome {
    let mut jobs = vec![];
    for b in Backend::ALL {
        for n in [1, 2, 63, 64, 65, 1000, 100_000] {
            for c in [1, 2, 3, 4, 8] {
                if b.supports(c) {
                    jobs.push((b, n, c));
                }
            }
        }
    }
    let errors = parallel(&jobs, |&(b, n, c)| {
        let t = 1 + (n + c) as u32 % 3;
        let caps = Caps::of(b.build(n, c, t).unwrap().as_mut());
        let trace = oracles::dict_trace(n, c, OPS_PER_CONFIG, (n * 16 + c) as u64, caps);
        oracles::check(&trace, &|| Target::Dict(b.build(n, c, t).unwrap()))
            .map_err(|f| format!("{} n={n} c={c} t={t}: {f}", b.name()))
    });
    first(errors)?;
    Ok(format!("{} configurations x {OPS_PER_CONFIG} ops, 0 divergences", jobs.len()))
}

fn systematic_space() -> Outcome {
    let n = 1_000_000usize;
    let mut report = vec![];
    for t in [1u32, 2, 4] {
        let mut d = SystematicChoiceDict::new(n, t);
        let k = (t * 64) as f64;
        let bound = n as f64 + (n as f64 / k).ceil() + 10.0 * n as f64 / (k * k) + 64.0 * (n as f64).log2().ceil();
        let mut rng = ChaCha8Rng::seed_from_u64(t as u64);
        let mut peak = d.bits_used();
        for _ in 0..100_000 {
            let l = rng.gen_range(1..=n);
            d.setcolor(rng.gen_range(0..2), l).unwrap();
            peak = peak.max(d.bits_used());
        }
        if peak as f64 > bound {
            return Err(format!("t={t}: {peak} bits > {bound:.0}"));
        }
        report.push(format!("t={t} {peak}<={bound:.0}"));
    }
    // Memory prefix after every mutation.
    let n = 20_000;
    let mut d = SystematicChoiceDict::new(n, 2);
    let mut member = vec![false; n + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for step in 0..100_000 {
        let l = rng.gen_range(1..=n);
        let j = rng.gen_range(0..2);
        d.setcolor(j, l).unwrap();
        member[l] = j == 1;
        let w = d.memory_prefix();
        let word = (1..=n).skip((l - 1) / 64 * 64).take(64).fold(0u64, |acc, x| acc | (member[x] as u64) << ((x - 1) % 64));
        if w[(l - 1) / 64] != word {
            return Err(format!("memory prefix wrong after mutation {step}"));
        }
        if step % 1000 == 0 && (1..=n).any(|x| (w[(x - 1) / 64] >> ((x - 1) % 64) & 1 == 1) != member[x]) {
            return Err(format!("memory prefix wrong at step {step}"));
        }
    }
    Ok(format!("{}; prefix held over 1e5 mutations", report.join(", ")))
}

fn nonsys_space() -> Outcome {
    let n = 1usize << 20;
    let mut report = vec![];
    for (c, slack_num, slack) in [(2usize, 16usize, 10_000.0), (4, 4, 100_000.0)] {
        let f = c.trailing_zeros() as f64;
        let bound = f * n as f64 + (n / slack_num) as f64 + slack;
        let mut d = NonsysChoiceDict::new(n, c, 2).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(c as u64);
        let mut peak = d.bits_used();
        for _ in 0..100_000 {
            d.setcolor(rng.gen_range(0..c), rng.gen_range(1..=n)).unwrap();
            peak = peak.max(d.bits_used());
        }
        if peak as f64 > bound {
            return Err(format!("c={c}: {peak} bits > {bound:.0}"));
        }
        report.push(format!("c={c} {peak}<={bound:.0}"));
    }
    Ok(report.join(", "))
}

fn robust_iteration() -> Outcome {
    const TRACES: u64 = 10_000;
    let mut jobs: Vec<Option<Backend>> = Backend::ALL.into_iter().map(Some).collect();
    jobs.push(None);
    let errors = parallel(&jobs, |&b| {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..TRACES {
            let n = [1, 2, 5, 63, 64, 65, 130, 300][i as usize % 8];
            let seed = rng.gen();
            let r = match b {
                Some(b) => {
                    let c = *[1, 2, 3, 4, 8].iter().filter(|&&c| b.supports(c)).nth(i as usize % 4).unwrap_or(&2);
                    let t = 1 + (i % 3) as u32;
                    let trace = oracles::iteration_trace(n, c, seed);
                    oracles::check(&trace, &|| Target::Dict(b.build(n, c, t).unwrap()))
                }
                None => {
                    let trace = oracles::pool_iteration_trace(n as u64 * 3, seed);
                    oracles::check(&trace, &|| Target::Pool(Pool::new(n as u64 * 3).unwrap()))
                }
            };
            r.map_err(|f| format!("{}: {f}", b.map_or("pool", Backend::name)))?;
        }
        Ok(())
    });
    first(errors)?;
    Ok(format!("{TRACES} traces each for {} backends and the pool", Backend::ALL.len()))
}

fn pool_curve() -> Outcome {
    let n = 1_000_000u64;
    let mut report = vec![];
    for m in [10u64, 100, 1000, 10_000] {
        let mut p = Pool::new(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(m);
        let bound = 16.0 * (m as f64 * (2.0 + n as f64 / (m + 1) as f64).log2()) + 1024.0;
        let mut peak = 0;
        for _ in 0..1_000_000 {
            if p.len() < m && (p.len() < m / 2 || rng.gen_bool(0.5)) {
                p.insert(rng.gen_range(1..=n)).unwrap();
            } else {
                p.extract_choice();
            }
            if p.len() <= m {
                peak = peak.max(p.bits_used());
            }
        }
        let misses = p.deadline_misses().total();
        if peak as f64 > bound || misses != 0 {
            return Err(format!("m={m}: peak {peak} (bound {bound:.0}), {misses} deadline misses"));
        }
        report.push(format!("m={m} {peak}<={bound:.0}"));
    }
    let trace = oracles::pool_trace(n, 1_000_000, 5);
    let mut p = Target::Pool(Pool::new(n).unwrap());
    oracles::replay_compare(&trace, &mut p).map_err(|d| d.to_string())?;
    if let Target::Pool(p) = &p {
        if p.deadline_misses().total() != 0 {
            return Err(format!("deadline misses on the random trace: {:?}", p.deadline_misses()));
        }
    }
    Ok(format!("{}; no deadline misses", report.join(", ")))
}

fn prefix_sums() -> Outcome {
    let configs = [(8usize, 20u32, 1u32), (100_000, 40, 17), (1_000_000, 40, 1)];
    let errors = parallel(&configs, |&(n, b, delta)| {
        let trace = oracles::prefix_trace(n, b, delta, 1_000_000, n as u64);
        oracles::check(&trace, &|| Target::Prefix(SearchablePrefixSums::new(n, b, delta).unwrap()))
            .map_err(|f| format!("(n={n}, b={b}, delta={delta}): {f}"))
    });
    first(errors)?;
    // Updates alternating at one index make many rebuilds meet one entry.
    for &(n, b, delta) in &configs {
        let mut p = SearchablePrefixSums::new(n, b, delta).unwrap();
        let d = (1i64 << delta) - 1;
        let j = n / 2 + 1;
        let mut a = 0i64;
        for step in 0..4 * n.min(20_000) + 10 {
            let up = step % 3 != 2 || a < d;
            let dd = if up { d } else { -d };
            p.update(j, dd).unwrap();
            a += dd;
            let want = if a > 0 { j } else { n + 1 };
            if p.search(1).unwrap() != want || p.sum(j).unwrap() != a as u64 {
                return Err(format!("boundary trace (n={n}): wrong answer at step {step}"));
            }
        }
    }
    Ok("3 configurations x 1e6 ops plus single-index boundary traces, 0 divergences".into())
}

fn sampling() -> Outcome {
    let n = 1000;
    let mut d = ColorWeightIndex::new(n, 2, 2).map_err(|e| e.to_string())?;
    let members: Vec<usize> = (0..16).map(|i| 7 + 61 * i).collect();
    for &x in &members {
        d.setcolor(1, x).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 1_000_000;
    let mut hits = HashMap::new();
    for _ in 0..draws {
        *hits.entry(d.uniform_choice(1, &mut rng).unwrap()).or_insert(0usize) += 1;
    }
    let mut worst: f64 = 0.0;
    for &x in &members {
        let f = hits.get(&x).copied().unwrap_or(0) as f64 / draws as f64;
        worst = worst.max((f - 1.0 / 16.0).abs());
    }
    if hits.len() != 16 || worst > 0.005 {
        return Err(format!("{} distinct results, worst deviation {worst:.5}", hits.len()));
    }
    // The rank bijection must be total on the class as well.
    let mut ranks: Vec<usize> = members.iter().map(|&x| d.p_rank(x).unwrap()).collect();
    ranks.sort_unstable();
    if ranks != (1..=16).collect::<Vec<_>>() {
        return Err("p-rank is not a bijection onto 1..16".into());
    }

    let trials = 120_000usize;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for _ in 0..trials {
        let mut perm = Vec::with_capacity(4);
        graphs::random_k_permutation(4, 4, 1, &mut rng, |x| perm.push(x)).map_err(|e| e.to_string())?;
        *counts.entry(perm).or_default() += 1;
    }
    let p = 1.0 / 24.0;
    let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
    let mut worst_z: f64 = 0.0;
    for c in counts.values() {
        worst_z = worst_z.max((*c as f64 - trials as f64 * p).abs() / sigma);
    }
    if counts.len() != 24 || worst_z > 5.0 {
        return Err(format!("{} permutations seen, worst z {worst_z:.2}", counts.len()));
    }
    Ok(format!("worst frequency deviation {worst:.5}; 24 permutations, worst z {worst_z:.2}"))
}

fn bfs_depths(g: &Graph, order: Order) -> Vec<usize> {
    let n = g.n();
    let mut depth = vec![usize::MAX; n + 1];
    for i in 1..=n {
        let r = order.at(n, i);
        if depth[r] != usize::MAX {
            continue;
        }
        depth[r] = 0;
        let mut q = VecDeque::from([r]);
        while let Some(u) = q.pop_front() {
            for &v in g.out(u) {
                let v = v as usize;
                if depth[v] == usize::MAX {
                    depth[v] = depth[u] + 1;
                    q.push_back(v);
                }
            }
        }
    }
    depth
}

/// Forest validity: every vertex once, parents earlier and adjacent in the
/// same tree, roots first in `order` among the vertices they reach, and
/// every vertex in the tree of the first root in `order` that reaches it.
fn check_forest(g: &Graph, order: Order, recs: &[ForestRecord]) -> Result<(), String> {
    let n = g.n();
    let depth = bfs_depths(g, order);
    // The owner of each vertex: first root in order that reaches it.
    let mut owner = vec![0; n + 1];
    for i in 1..=n {
        let r = order.at(n, i);
        if owner[r] != 0 {
            continue;
        }
        owner[r] = r;
        let mut q = VecDeque::from([r]);
        while let Some(u) = q.pop_front() {
            for &v in g.out(u) {
                if owner[v as usize] == 0 {
                    owner[v as usize] = r;
                    q.push_back(v as usize);
                }
            }
        }
    }
    if recs.len() != n {
        return Err(format!("{} records for {n} vertices", recs.len()));
    }
    let mut tree_of = vec![0; n + 1];
    let mut root_of_tree = vec![0; n + 2];
    for r in recs {
        if tree_of[r.vertex] != 0 {
            return Err(format!("vertex {} output twice", r.vertex));
        }
        if r.parent == 0 {
            root_of_tree[r.tree] = r.vertex;
        } else if tree_of[r.parent] != r.tree || !g.out(r.parent).contains(&(r.vertex as u32)) {
            return Err(format!("bad edge ({}, {})", r.parent, r.vertex));
        }
        if owner[r.vertex] != root_of_tree[r.tree] {
            return Err(format!("vertex {} in the wrong tree", r.vertex));
        }
        if let Some(d) = r.depth {
            if d != depth[r.vertex] {
                return Err(format!("depth of {} is {d}, expected {}", r.vertex, depth[r.vertex]));
            }
        }
        tree_of[r.vertex] = r.tree;
    }
    Ok(())
}

fn find(p: &mut [usize], mut x: usize) -> usize {
    while p[x] != x {
        p[x] = p[p[x]];
        x = p[x];
    }
    x
}

fn graph_algorithms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // (a) spanning forest.
    let n = 10_000;
    let g = Graph::random(n, 100_000, false, &mut rng).map_err(|e| e.to_string())?;
    let order = Order::Seeded(3);
    let mut recs = vec![];
    let rep = graphs::spanning_forest(&g, order, 4, |r| recs.push(r)).map_err(|e| e.to_string())?;
    check_forest(&g, order, &recs).map_err(|e| format!("forest: {e}"))?;
    let mut uf: Vec<usize> = (0..=n).collect();
    for u in 1..=n {
        for &v in g.out(u) {
            let (a, b) = (find(&mut uf, u), find(&mut uf, v as usize));
            uf[a] = b;
        }
    }
    let mut tree_comp: HashMap<usize, usize> = HashMap::new();
    for r in &recs {
        let comp = find(&mut uf, r.vertex);
        if *tree_comp.entry(r.tree).or_insert(comp) != comp {
            return Err("forest tree spans two components".into());
        }
    }
    let comps = (1..=n).filter(|&v| find(&mut uf, v) == v).count();
    if tree_comp.len() != comps {
        return Err(format!("{} trees for {comps} components", tree_comp.len()));
    }
    let forest_budget = 1.25 * n as f64;
    if rep.peak_bits as f64 > forest_budget {
        return Err(format!("forest peak {} bits > {forest_budget:.0}", rep.peak_bits));
    }

    // (b) BFS.
    for i in 0..100 {
        let n = rng.gen_range(1..=1000);
        let m = rng.gen_range(0..=(3 * n).min(n * (n - 1) / 2));
        let g = Graph::random(n, m, i % 2 == 1, &mut rng).map_err(|e| e.to_string())?;
        let order = [Order::Identity, Order::Reverse, Order::Seeded(i)][i as usize % 3];
        let mut recs = vec![];
        graphs::bfs_forest(&g, order, 1 + i as usize % 3, ColorBackend::Nonsys, |r| recs.push(r)).map_err(|e| e.to_string())?;
        check_forest(&g, order, &recs).map_err(|e| format!("bfs graph {i}: {e}"))?;
    }
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures");
    for name in ["directed_cycle_tail.txt", "directed_dag.txt", "directed_two_components.txt"] {
        let text = std::fs::read_to_string(format!("{dir}/{name}")).map_err(|e| e.to_string())?;
        let g = Graph::parse(&text).map_err(|e| format!("{name}: {e}"))?;
        for order in [Order::Identity, Order::Reverse, Order::Seeded(1)] {
            let mut recs = vec![];
            graphs::bfs_forest(&g, order, 2, ColorBackend::Nonsys, |r| recs.push(r)).map_err(|e| e.to_string())?;
            check_forest(&g, order, &recs).map_err(|e| format!("{name}: {e}"))?;
        }
    }
    let n = 100_000;
    let g = Graph::random(n, 400_000, false, &mut rng).map_err(|e| e.to_string())?;
    let mut recs = vec![];
    let bfs = graphs::bfs_forest(&g, Order::Identity, 2, ColorBackend::Nonsys, |r| recs.push(r)).map_err(|e| e.to_string())?;
    check_forest(&g, Order::Identity, &recs).map_err(|e| format!("bfs n=1e5: {e}"))?;
    let bfs_budget = 2.2 * n as f64 + 10_000.0;
    if bfs.peak_bits as f64 > bfs_budget {
        return Err(format!("bfs peak {} bits > {bfs_budget:.0}", bfs.peak_bits));
    }

    // (c) cliques.
    for i in 0..100 {
        let n = rng.gen_range(2..=200);
        let max = n * (n - 1) / 2;
        let m = rng.gen_range(max / 5..=max * 4 / 5);
        let mut g = Graph::random(n, m, false, &mut rng).map_err(|e| e.to_string())?;
        if i % 2 == 0 {
            let mut edges = vec![];
            for u in 1..=n {
                edges.extend(g.out(u).iter().filter(|&&v| v as usize > u).map(|&v| (u, v as usize)));
            }
            edges.sort_unstable();
            g = Graph::from_edges(n, &edges, false).map_err(|e| e.to_string())?;
        }
        let mut out = vec![];
        graphs::maximal_clique(&g, 2, ColorBackend::Nonsys, |u| out.push(u)).map_err(|e| e.to_string())?;
        let adj = |u: usize, v: usize| g.out(u).contains(&(v as u32));
        let mut inside = vec![false; n + 1];
        for (k, &u) in out.iter().enumerate() {
            if inside[u] || out[..k].iter().any(|&v| !adj(u, v)) {
                return Err(format!("clique graph {i}: {u} breaks the clique"));
            }
            inside[u] = true;
        }
        if let Some(x) = (1..=n).find(|&x| !inside[x] && out.iter().all(|&u| adj(u, x))) {
            return Err(format!("clique graph {i}: extendable by {x}"));
        }
    }
    Ok(format!(
        "forest peak {} <= {forest_budget:.0} ({} sweeps); bfs peak {} <= {bfs_budget:.0}; 100 cliques maximal",
        rep.peak_bits, rep.sweeps, bfs.peak_bits
    ))
}

/// Largest accepted (redundancy x words per op) / (n / 64).
const LOWER_BOUND_FACTOR: f64 = 64.0;

fn lower_bound_product() -> Outcome {
    let n = 1usize << 20;
    let mut report = vec![];
    for t in [1u32, 2, 4, 8] {
        let mut d = SystematicChoiceDict::new(n, t);
        let mut rng = ChaCha8Rng::seed_from_u64(t as u64);
        let ops = 100_000;
        let mut words = 0;
        for _ in 0..ops {
            let (j, l) = (rng.gen_range(0..2), rng.gen_range(1..=n));
            probe::start();
            d.setcolor(j, l).unwrap();
            let _ = d.choice(rng.gen_range(0..2)).unwrap();
            words += probe::stop();
        }
        let per_op = words as f64 / (2 * ops) as f64;
        let redundancy = (d.bits_used() - n as u64) as f64;
        let factor = redundancy * per_op / (n as f64 / 64.0);
        if factor > LOWER_BOUND_FACTOR {
            return Err(format!("t={t}: factor {factor:.2} > {LOWER_BOUND_FACTOR}"));
        }
        report.push(format!("t={t} red={redundancy:.0} words/op={per_op:.2} factor={factor:.2}"));
    }
    Ok(report.join(", "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("systematic space", systematic_space),
        ("nonsystematic space", nonsys_space),
        ("robust iteration", robust_iteration),
        ("pool space curve", pool_curve),
        ("prefix sums", prefix_sums),
        ("uniform sampling", sampling),
        ("graph algorithms", graph_algorithms),
        ("lower-bound product", lower_bound_product),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let k = i + 1;
        if !wanted.is_empty() && !wanted.contains(&k) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {k} {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {k} {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
