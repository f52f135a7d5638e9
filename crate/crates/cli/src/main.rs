mod bench;
mod chainstore;
mod diag;
mod fit;
mod table;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "spikegibbs", version, about = "Sparse spike-and-slab Gibbs sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write chain files to a run directory.
    Fit(Box<fit::FitArgs>),
    /// Run a simulation benchmark scenario.
    Bench(bench::BenchArgs),
    /// Inspect stored chain files.
    Chainstore {
        #[command(subcommand)]
        command: chainstore::ChainstoreCommand,
    },
    /// Posterior summaries and mixing diagnostics.
    Diag {
        #[command(subcommand)]
        command: diag::DiagCommand,
    },
}

/// Output destination shared by the table-emitting subcommands.
#[derive(clap::Args, Debug, Clone)]
pub struct OutputArgs {
    /// Write the table to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tab-separated instead of comma-separated output.
    #[arg(long)]
    pub tsv: bool,
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Fit(a) => fit::run(&a),
        Command::Bench(a) => bench::run(&a),
        Command::Chainstore { command } => chainstore::run(&command),
        Command::Diag { command } => diag::run(&command),
    }
}
