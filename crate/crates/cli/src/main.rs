//! `ood` — command-line pipeline for complexity-compensated OOD scoring.
//!
//! Subcommands wire the library stages into reproducible runs:
//! `synth` makes datasets, `complexity` compresses them, `fit`/`nll` train
//! and apply the density model, `score` joins the two sides into S scores
//! with a decision strategy, and `eval`/`pooling` produce the report tables.

mod commands;
mod config;
mod runinfo;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::config::FileConfig;

#[derive(Parser)]
#[command(name = "ood", version, about = "Complexity-compensated out-of-distribution scoring")]
struct Cli {
    /// TOML config file; explicit flags take precedence over its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Seed for every random choice the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for per-image parallelism (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Directory all outputs are written to.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (raw containers plus a manifest CSV).
    Synth(commands::synth::Args),
    /// Per-image complexity estimates under one or more codecs.
    Complexity(commands::complexity::Args),
    /// Fit the context model on a dataset manifest.
    Fit(commands::fit::Args),
    /// Negative log-likelihoods of a dataset under a model.
    Nll(commands::nll::Args),
    /// Join NLL and complexity files into S scores and apply a strategy.
    Score(commands::score::Args),
    /// AUROC / correlation / histogram report from score files.
    Eval(commands::eval::Args),
    /// Pooling sweep table for a noise dataset.
    Pooling(commands::pooling::Args),
}

/// Values shared by every subcommand after merging flags with the config file.
pub struct Globals {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub config: FileConfig,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let file_config = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };

    let workers = cli.workers.or(file_config.global.workers);
    if let Some(workers) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build_global()
            .context("worker pool already initialized")?;
    }

    let globals = Globals {
        seed: cli.seed.or(file_config.global.seed).unwrap_or(0),
        out_dir: cli
            .out_dir
            .clone()
            .or_else(|| file_config.global.out_dir.clone())
            .unwrap_or_else(|| PathBuf::from(".")),
        config: file_config,
    };
    std::fs::create_dir_all(&globals.out_dir)
        .with_context(|| format!("creating {}", globals.out_dir.display()))?;

    match cli.command {
        Command::Synth(args) => commands::synth::run(args, &globals),
        Command::Complexity(args) => commands::complexity::run(args, &globals),
        Command::Fit(args) => commands::fit::run(args, &globals),
        Command::Nll(args) => commands::nll::run(args, &globals),
        Command::Score(args) => commands::score::run(args, &globals),
        Command::Eval(args) => commands::eval::run(args, &globals),
        Command::Pooling(args) => commands::pooling::run(args, &globals),
    }
}
