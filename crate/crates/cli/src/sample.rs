use std::io::Write;

use choicedict::graphs;
use choicedict::ranksel::ColorWeightIndex;
use choicedict::ColorDict;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Fail;

#[derive(clap::Subcommand)]
pub enum Cmd {
    /// A uniformly random sequence of k distinct elements of 1..=n.
    Perm {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        t: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Colors 1..=n at random, then draws uniform elements of color j.
    Color {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        c: usize,
        #[arg(long, default_value_t = 1)]
        j: usize,
        #[arg(long, default_value_t = 10)]
        draws: usize,
        #[arg(long, default_value_t = 1)]
        t: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

pub fn run(cmd: &Cmd, out: &mut impl Write) -> Result<(), Fail> {
    match *cmd {
        Cmd::Perm { n, k, t, seed } => {
            if k > n {
                return Err(Fail::Usage(format!("--k {k} exceeds --n {n}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut res = Ok(());
            let report = graphs::random_k_permutation(n, k, t, &mut rng, |x| {
                if res.is_ok() {
                    res = writeln!(out, "{x}");
                }
            })?;
            res?;
            writeln!(out, "# peak_bits={}", report.peak_bits)?;
        }
        Cmd::Color { n, c, j, draws, t, seed } => {
            if j >= c {
                return Err(Fail::Usage(format!("--j {j} must be below --c {c}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut d = ColorWeightIndex::new(n, c, t)?;
            for l in 1..=n {
                d.setcolor(rng.gen_range(0..c), l)?;
            }
            writeln!(out, "# size={}", d.size(j)?)?;
            for _ in 0..draws {
                writeln!(out, "{}", d.uniform_choice(j, &mut rng)?)?;
            }
        }
    }
    Ok(())
}
