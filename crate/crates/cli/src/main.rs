mod commands;
mod config;
mod error;
mod output;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::{config_err, CliError};
use crate::output::Outputs;

#[derive(Parser)]
#[command(name = "lms", version, about = "Latent metric space experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a data matrix.
    Simulate(RunArgs),
    /// Principal component scores.
    Embed(RunArgs),
    /// Choose the embedding dimension.
    SelectDim(RunArgs),
    /// Rips persistence diagram.
    Tda(RunArgs),
    /// Graph geodesics of latent points against scores.
    Geodesic(RunArgs),
    /// kNN error curves over the embedding dimension.
    Predict(RunArgs),
    /// Regenerate a figure's data.
    Reproduce(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "LMS_THREADS")]
    threads: Option<usize>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Embed(_) => "embed",
            Command::SelectDim(_) => "select-dim",
            Command::Tda(_) => "tda",
            Command::Geodesic(_) => "geodesic",
            Command::Predict(_) => "predict",
            Command::Reproduce(_) => "reproduce",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a)
            | Command::Embed(a)
            | Command::SelectDim(a)
            | Command::Tda(a)
            | Command::Geodesic(a)
            | Command::Predict(a)
            | Command::Reproduce(a) => a,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(out) => {
            println!("{}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lms: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cmd: &Command) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let args = cmd.args();
    let raw = std::fs::read(&args.config)
        .map_err(|e| config_err(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = Config::load(&args.config)?;

    let seed = args.seed.or(cfg.file_seed()).unwrap_or(0);
    cfg.apply_seed(seed);
    let threads = args.threads.or(cfg.threads);
    if threads == Some(0) {
        return Err(config_err("threads must be positive"));
    }
    if let Some(t) = threads {
        cfg.threads = Some(t);
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| config_err(format!("thread pool: {e}")))?;
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("lms-out").join(cmd.name()));
    cfg.out = Some(out_dir.clone());

    let mut outputs = Outputs::new(&out_dir)?;
    let results = match cmd {
        Command::Simulate(_) => commands::simulate_cmd(&cfg, &mut outputs),
        Command::Embed(_) => commands::embed_cmd(&cfg, &mut outputs),
        Command::SelectDim(_) => commands::select_dim_cmd(&cfg, seed, &mut outputs),
        Command::Tda(_) => commands::tda_cmd(&cfg, seed, &mut outputs),
        Command::Geodesic(_) => commands::geodesic_cmd(&cfg, &mut outputs),
        Command::Predict(_) => commands::predict_cmd(&cfg, seed, &mut outputs),
        Command::Reproduce(_) => reproduce::reproduce_cmd(&cfg, seed, &mut outputs),
    }?;

    let manifest = json!({
        "command": cmd.name(),
        "config_path": &args.config,
        "config_sha256": Sha256::digest(&raw).iter().map(|b| format!("{b:02x}")).collect::<String>(),
        "config": cfg,
        "seed": seed,
        "threads": rayon::current_num_threads(),
        "versions": {
            "lms": env!("CARGO_PKG_VERSION"),
            "lms_core": lms_core::VERSION,
        },
        "wall_time_s": started.elapsed().as_secs_f64(),
        "outputs": outputs.names(),
        "results": results,
    });
    outputs.commit(&out_dir, &manifest)?;
    Ok(out_dir)
}
