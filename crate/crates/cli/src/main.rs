//! `diffnet`: drive diffusion experiments on sparse marked graphs from
//! declarative TOML configs, with deterministic seeding and structured
//! persistence.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime or numeric error.

mod commands;
mod config;
mod manifest;

use clap::{Args, Parser, Subcommand};
use commands::{CliError, RunContext};
use config::{OutputFormat, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "diffnet",
    version,
    about = "Interacting diffusions on sparse marked graphs: samplers, SDE runs, locality and synchronization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph (optionally with marks) to the documented JSON schema.
    SampleGraph(CommonArgs),
    /// Integrate the coupled SDE system on a network file.
    Simulate(CommonArgs),
    /// Truncation-gap experiment with fitted decay envelope.
    Locality(CommonArgs),
    /// Finite-size versus limit-ensemble convergence study.
    Converge(CommonArgs),
    /// Noise-only concentration of truncated neighborhood statistics.
    Concentration(CommonArgs),
    /// Chaos-factorization covariance estimates.
    Chaos(CommonArgs),
    /// Synchronization phase diagram on Galton-Watson trees.
    PhaseDiagram(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed override (beats DIFFNET_SEED and the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker-thread count (numerical results do not depend on it).
    #[arg(long)]
    workers: Option<usize>,
    /// Primary output format.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

const SEED_ENV: &str = "DIFFNET_SEED";

fn build_context(args: &CommonArgs) -> Result<RunContext, CliError> {
    let config_bytes = std::fs::read(&args.config).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let text = String::from_utf8(config_bytes.clone())
        .map_err(|e| CliError::Config(format!("config is not UTF-8: {e}")))?;
    let config: RunConfig =
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;

    let env_seed = match std::env::var(SEED_ENV) {
        Ok(v) => Some(v.parse::<u64>().map_err(|e| {
            CliError::Config(format!("{SEED_ENV} must be a u64: {e}"))
        })?),
        Err(_) => None,
    };
    let (master_seed, seed_source) = if let Some(s) = args.seed {
        (s, "flag")
    } else if let Some(s) = env_seed {
        (s, "env")
    } else {
        (config.master_seed, "config")
    };

    let out_dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let workers = args.workers.or(config.workers).unwrap_or(0); // 0: rayon default
    let format = args.format.or(config.format).unwrap_or(OutputFormat::Csv);
    Ok(RunContext {
        config,
        config_bytes,
        master_seed,
        seed_source: seed_source.to_string(),
        out_dir,
        workers,
        format,
    })
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    let (args, run): (&CommonArgs, fn(&RunContext) -> Result<(), CliError>) = match command {
        Command::SampleGraph(a) => (a, commands::run_sample_graph),
        Command::Simulate(a) => (a, commands::run_simulate),
        Command::Locality(a) => (a, commands::run_locality),
        Command::Converge(a) => (a, commands::run_converge),
        Command::Concentration(a) => (a, commands::run_concentration),
        Command::Chaos(a) => (a, commands::run_chaos),
        Command::PhaseDiagram(a) => (a, commands::run_phase_diagram),
    };
    let ctx = build_context(args)?;
    if ctx.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(ctx.workers)
            .build()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
        pool.install(|| run(&ctx))
    } else {
        run(&ctx)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("diffnet: {e}");
            match e {
                CliError::Config(_) => ExitCode::from(2),
                CliError::Runtime(_) => ExitCode::from(3),
            }
        }
    }
}
