//! Experiment runner: reads a config, runs one subcommand, and writes JSON
//! or CSV outputs plus a manifest of content hashes.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::Outputs;

#[derive(Debug, Parser)]
#[command(name = "latwalk", version, about = "Self-interacting walks with drift")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config, or JSON if the name ends in `.json`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Partition functions and endpoint laws.
    Enumerate,
    /// Truncated generating functions `H_λ` and `D_λ`.
    Gf,
    /// Lyapunov norm table, and the shape-limit scan over `lambdas`.
    Lyapunov,
    /// Wulff shape of the norm table.
    Wulff,
    /// Skeletons of sampled paths with P1/P2 checks.
    Skeleton,
    /// Irreducible decompositions and the truncated Q-mass.
    Decompose,
    /// Monte Carlo chains and speed estimates.
    Sample,
    /// Free energy, rate function and phase classification.
    Phase,
    /// Pattern frequencies on sampled paths.
    Patterns,
    /// Invariant suite; exits 1 if any invariant fails.
    Check,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Enumerate => "enumerate",
            Command::Gf => "gf",
            Command::Lyapunov => "lyapunov",
            Command::Wulff => "wulff",
            Command::Skeleton => "skeleton",
            Command::Decompose => "decompose",
            Command::Sample => "sample",
            Command::Phase => "phase",
            Command::Patterns => "patterns",
            Command::Check => "check",
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be positive".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| CliError::Failed(e.to_string()))?;
    let ctx = Context {
        spec: cfg.spec()?,
        seed: cfg.seed,
        cfg: &cfg,
    };
    let mut out = Outputs::default();
    let result = pool.install(|| match cli.command {
        Command::Enumerate => commands::enumerate(&ctx, &mut out),
        Command::Gf => commands::gf(&ctx, &mut out),
        Command::Lyapunov => commands::lyapunov(&ctx, &mut out),
        Command::Wulff => commands::wulff(&ctx, &mut out),
        Command::Skeleton => commands::skeleton(&ctx, &mut out),
        Command::Decompose => commands::decompose(&ctx, &mut out),
        Command::Sample => commands::sample(&ctx, &mut out),
        Command::Phase => commands::phase(&ctx, &mut out),
        Command::Patterns => commands::patterns(&ctx, &mut out),
        Command::Check => commands::check(&ctx, &mut out),
    });
    match result {
        // a completed report of violated invariants is still written
        Ok(()) | Err(CliError::Invariant(_)) => {
            out.commit(&dir, cli.command.name(), &cfg.canonical(), cfg.seed)?;
            result
        }
        Err(e) => Err(e),
    }
}
