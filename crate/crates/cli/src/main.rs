//! `astro`: generate data, train, tune the threshold, evaluate and report.

mod commands;
mod config;
mod manifest;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use astro_core::AstroError;
use clap::{Parser, Subcommand};

use crate::config::RunConfig;

/// Bad input from the operator; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "astro", version, about = "Graph-temporal anomaly detection for sensor networks")]
struct Cli {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides `paths.out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic plant and labeled sensor table.
    Gen,
    /// Train the detector and write a checkpoint.
    Train,
    /// Tune the decision threshold on validation scores.
    Tune {
        /// Pre-scored `score,label` CSV to tune on instead of the checkpoint.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Score test windows and compute metrics.
    Eval {
        /// Pre-scored `score,label` CSV to evaluate instead of the checkpoint.
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Decision threshold; defaults to the tuned value, then `baseline_tau`.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Aggregate metrics over run directories.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Histogram bins over [0, 1].
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Measure single-window inference latency.
    Latency {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 50)]
        warmup: usize,
    },
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.paths.out_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Gen => commands::gen(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Tune { scores } => commands::tune(&cfg, scores.as_deref()),
        Command::Eval { scores, tau } => commands::eval(&cfg, scores.as_deref(), tau),
        Command::Report { runs, bins } => report::report(&cfg, &runs, bins),
        Command::Latency { trials, warmup } => commands::latency(&cfg, trials, warmup),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<AstroError>() {
            return if e.is_validation() { 2 } else { 3 };
        }
    }
    3
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
