use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod bench;
mod graph;
mod sample;

#[derive(Parser)]
#[command(name = "choicedict", version, about = "Choice dictionary benchmarks, graph runs and samplers")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run op-mix workloads and print one CSV row per configuration.
    Bench(bench::Args),
    /// Run a space-bounded graph algorithm on a graph file.
    Graph(graph::Args),
    /// Draw random samples.
    #[command(subcommand)]
    Sample(sample::Cmd),
}

/// Failure of a subcommand, mapped to the exit status.
pub enum Fail {
    /// Bad flag values not caught by the parser (exit 1).
    Usage(String),
    /// Unreadable or malformed input, rejected instances (exit 2).
    Input(String),
}

impl From<choicedict::Error> for Fail {
    fn from(e: choicedict::Error) -> Self {
        Fail::Input(e.to_string())
    }
}

impl From<io::Error> for Fail {
    fn from(e: io::Error) -> Self {
        Fail::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let res = match cli.cmd {
        Cmd::Bench(a) => bench::run(&a, &mut out),
        Cmd::Graph(a) => graph::run(&a, &mut out),
        Cmd::Sample(c) => sample::run(&c, &mut out),
    };
    let res = res.and_then(|()| out.flush().map_err(Fail::from));
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Fail::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
