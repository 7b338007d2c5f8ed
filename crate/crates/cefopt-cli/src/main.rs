//! `cefopt`: experiment runner for compressed distributed subgradient
//! methods. See README for the config format.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod csvio;

use commands::RunOptions;

#[derive(Parser)]
#[command(
    name = "cefopt",
    about = "Distributed non-smooth constrained optimization under communication compression",
    version
)]
struct Cli {
    /// Concurrent runs (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory (overrides CEFOPT_OUT and the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Replace the config's seed list with a single seed.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute every (sweep point × seed) run of a config.
    Run { config: PathBuf },
    /// Like `run`, but requires a non-empty [sweep] section.
    Sweep { config: PathBuf },
    /// Execute the offline acceptance suite and print a pass/fail table.
    Verify,
    /// Reproduce a toy trajectory against its closed form (cgd | ef21 | safe_ef).
    Counterexample { which: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    cefopt::parallel::limit_global_threads(cli.jobs);
    let code = match &cli.cmd {
        Cmd::Run { config } => commands::cmd_run(
            config,
            &RunOptions {
                jobs: cli.jobs,
                out_override: cli.out.clone(),
                seed_override: cli.seed_override,
                require_sweep: false,
            },
        ),
        Cmd::Sweep { config } => commands::cmd_run(
            config,
            &RunOptions {
                jobs: cli.jobs,
                out_override: cli.out.clone(),
                seed_override: cli.seed_override,
                require_sweep: true,
            },
        ),
        Cmd::Verify => commands::cmd_verify(),
        Cmd::Counterexample { which } => commands::cmd_counterexample(which),
    };
    ExitCode::from(code as u8)
}
