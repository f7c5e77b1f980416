mod commands;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "sandlab", version, about = "Abelian sandpiles, Green's functions and the sandpile spectral gap")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Same as `--format json`.
    #[arg(long, global = true)]
    pub json: bool,
    /// Worker threads (default: SANDLAB_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Omit the wall time so that identical runs give identical bytes.
    #[arg(long, global = true)]
    pub reproducible: bool,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    /// Raw little-endian table (greens only).
    Bin,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate a Green's function.
    Greens(commands::GreensArgs),
    /// Decay, l^p membership or asymptotic checks of Green's functions.
    GreensReport(commands::GreensReportArgs),
    /// Stabilize a sandpile on a torus with a sink.
    Stabilize(commands::StabilizeArgs),
    /// Run the sandpile Markov chain.
    Chain(commands::ChainArgs),
    /// Order and invariant factors of the sandpile group.
    Group(commands::GroupArgs),
    /// Spectral gap by prevector search or exact enumeration.
    Gap(commands::GapArgs),
    /// Exact dual group and L^2 distances on a small torus.
    Dual(commands::DualArgs),
    /// Lower bound and heuristic upper proxy for the mixing profile.
    Cutoff(commands::CutoffArgs),
    /// The gap constant and its reciprocal by branch and bound.
    Gamma(commands::GammaArgs),
    /// Parallel toppling of i.i.d. piles on a window.
    Iid(commands::IidArgs),
    /// Pairing invariance under stabilization on a window.
    Invariants(commands::InvariantsArgs),
}

fn configure_threads(flag: Option<usize>) -> anyhow::Result<()> {
    let env = match std::env::var("SANDLAB_THREADS") {
        Ok(s) => Some(
            s.trim()
                .parse::<usize>()
                .map_err(|_| commands::usage(format!("SANDLAB_THREADS must be a positive integer, got {s:?}")))?,
        ),
        Err(_) => None,
    };
    if let Some(n) = flag.or(env) {
        if n == 0 {
            return Err(commands::usage("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<sandlab::Error>() {
        Some(err) if err.is_numerical() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut global = cli.global;
    if global.json {
        global.format = Format::Json;
    }
    let run = || -> anyhow::Result<()> {
        configure_threads(global.threads)?;
        match &cli.command {
            Command::Greens(a) => commands::greens(a, &global),
            Command::GreensReport(a) => commands::greens_report(a, &global),
            Command::Stabilize(a) => commands::stabilize(a, &global),
            Command::Chain(a) => commands::chain(a, &global),
            Command::Group(a) => commands::group(a, &global),
            Command::Gap(a) => commands::gap(a, &global),
            Command::Dual(a) => commands::dual(a, &global),
            Command::Cutoff(a) => commands::cutoff(a, &global),
            Command::Gamma(a) => commands::gamma(a, &global),
            Command::Iid(a) => commands::iid(a, &global),
            Command::Invariants(a) => commands::invariants(a, &global),
        }
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sandlab: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
