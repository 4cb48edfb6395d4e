use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rank_surfaces_cli::{cmd_bench, cmd_run, cmd_sir, Invocation};

#[derive(Parser)]
#[command(name = "rank-surfaces", version = env!("RANK_SURFACES_VERSION"))]
#[command(about = "Sequential design for ranking noisy response surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One seeded design run.
    Run(Options),
    /// Replications of one or more acquisition methods.
    Bench(Options),
    /// The epidemic-control experiment, with noise-level output.
    Sir(Options),
}

#[derive(clap::Args)]
struct Options {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for replications (defaults to all cores).
    #[arg(long, env = "RANK_SURFACES_JOBS")]
    jobs: Option<usize>,
    /// Overrides the run seed, or the base seed of a bench.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<Options> for Invocation {
    fn from(o: Options) -> Self {
        Invocation { config: o.config, jobs: o.jobs, seed: o.seed, out: o.out }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, result) = match cli.command {
        Command::Run(o) => ("run", cmd_run(&o.into())),
        Command::Bench(o) => ("bench", cmd_bench(&o.into())),
        Command::Sir(o) => ("sir", cmd_sir(&o.into())),
    };
    match result {
        Ok(dir) => {
            println!("{name}: wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
