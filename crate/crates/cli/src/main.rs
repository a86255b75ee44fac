//! `treeforge`: grammar transpiler, input generator and constraint solver.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "treeforge",
    version,
    about = "Typed derivation trees from context-free grammars"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Emit the Rust module and a JSON manifest for a grammar.
    Transpile {
        grammar: PathBuf,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Generate random inputs.
    Generate {
        grammar: PathBuf,
        #[arg(short = 'n', long, default_value_t = 10)]
        count: usize,
        #[command(flatten)]
        common: Common,
        /// Make every terminal reachable from this rule equally likely.
        #[arg(long = "flatten", value_name = "RULE")]
        flatten: Vec<String>,
        /// Write one file per input instead of printing them.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Evolve inputs that satisfy a constraint file.
    Solve {
        grammar: PathBuf,
        #[arg(long)]
        constraints: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(short = 'p', long, default_value_t = 100)]
        population: usize,
        #[arg(short = 'e', long, default_value_t = 10)]
        elites: usize,
        #[arg(short = 'c', long, default_value_t = 200)]
        candidates: usize,
        #[arg(short = 'i', long, default_value_t = 500)]
        iterations: usize,
        #[arg(long, value_enum, default_value_t = Algo::Nsga2)]
        algo: Algo,
        /// Stop after this much wall time, e.g. `10s`.
        #[arg(long, value_parser = humantime::parse_duration)]
        time_budget: Option<Duration>,
        /// Threads for constraint evaluation.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write each satisfying input to its own file.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// k-path coverage of a directory of inputs.
    Coverage {
        grammar: PathBuf,
        input_dir: PathBuf,
        #[arg(short, long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        json: bool,
    },
    /// Time tree operations and fit per-node cost models.
    Bench {
        grammar: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "generate,check,mutate,crossover"
        )]
        ops: Vec<treeforge::bench::Op>,
        #[arg(long, value_parser = humantime::parse_duration, default_value = "30s")]
        budget: Duration,
        /// Constraints evaluated by the check operation.
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Write the raw samples as JSON lines.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print cost-model rows for recorded samples.
    Report { samples: Vec<PathBuf> },
    /// Show the grammar graph.
    Graph {
        grammar: PathBuf,
        /// Print Graphviz DOT instead of a summary.
        #[arg(long)]
        dot: bool,
    },
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Random seed; a fresh one is drawn and printed when absent.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 40)]
    max_depth: usize,
    #[arg(long, value_enum, default_value_t = BackendKind::Dynamic)]
    backend: BackendKind,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum BackendKind {
    /// Generated types; only for grammars built into this binary.
    Static,
    Dynamic,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Algo {
    Elitist,
    Nsga2,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return if usage {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
