//! `metalens`: design, focus, trap, Monte Carlo, fit and ingest pipelines.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 usage, 3 config error,
//! 4 input error, 5 numerical failure.

mod analysis;
mod bundle;
mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand, ValueEnum};
use config::RunConfig;
use error::CliError;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "metalens", version, about = "Metalens tweezer design and single-atom simulation pipelines")]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config value.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the nanobrick layout and efficiency table.
    Design,
    /// Propagate to the focus and extract focal metrics.
    Focus,
    /// Trap depth, frequencies, collection efficiency and count ratio.
    Trap,
    /// Simulate telegraph traces and analyse them; optional bias sweep.
    Mc,
    /// Fit a model to two-column data.
    Fit,
    /// Validate an external file and, for traces, run the trace analysis.
    Ingest {
        #[arg(long, value_enum)]
        schema: Schema,
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Schema {
    Trace,
    Layout,
    Efficiency,
    Columns,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        config.seed = cli.seed;
    }
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Other(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Other(format!("{}: {e}", cli.out.display())))?;
    match cli.command {
        Command::Design => commands::design(config, &cli.out),
        Command::Focus => commands::focus(config, &cli.out),
        Command::Trap => commands::trap(config, &cli.out),
        Command::Mc => commands::mc(config, &cli.out),
        Command::Fit => commands::fit(config, &cli.out),
        Command::Ingest { schema, path } => commands::ingest(config, &cli.out, schema, &path),
    }
}

fn main() {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
