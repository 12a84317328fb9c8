//! `ptp`: instance generation, training, evaluation, oracle runs and
//! learning-curve aggregation.
//!
//! Exit codes: 0 on success, 2 for usage and configuration errors, 3 for
//! runtime failures.

mod commands;
mod config;
mod plotdata;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Error caused by the invocation rather than the run itself (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// Environment variable naming the root directory for relative output paths.
pub const OUT_ENV: &str = "PTP_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "ptp",
    version,
    about = "Gumbel search with self-competitive training for TSP and job-shop scheduling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnvKind {
    Tsp,
    Jssp,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write random instances as text files inst_0000.txt, inst_0001.txt, ...
    Gen(GenArgs),
    /// Train from a TOML run config.
    Train(TrainArgs),
    /// Evaluate a checkpoint and report optimality gaps.
    Eval(EvalArgs),
    /// Solve instances with the exact and heuristic reference solvers.
    Oracle(OracleArgs),
    /// Aggregate metrics files into a learning curve with standard errors.
    Plotdata(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub env: EnvKind,
    /// Node count for TSP, `JOBSxMACHINES` for JSSP.
    #[arg(long)]
    pub size: String,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config key, e.g. `--set train.gamma=0.3` (repeatable).
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Shorthand for `--set train.seed=N`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Single worker with strictly alternating generation and learning.
    #[arg(long)]
    pub deterministic: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalModeArg {
    Greedy,
    Search,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Greedy-actor checkpoint for search mode; defaults to `final_greedy.ckpt`
    /// next to the checkpoint, then to the checkpoint itself.
    #[arg(long)]
    pub greedy_checkpoint: Option<PathBuf>,
    /// Directory of instance files.
    #[arg(long, conflicts_with = "taillard", required_unless_present = "taillard")]
    pub instances: Option<PathBuf>,
    /// Bundled Taillard set: 15x15, 20x20 or 30x20.
    #[arg(long)]
    pub taillard: Option<String>,
    #[arg(long, value_enum, default_value_t = EvalModeArg::Greedy)]
    pub mode: EvalModeArg,
    #[arg(long, default_value_t = 50)]
    pub n_sim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Node budget of the exact JSSP solver used for references.
    #[arg(long, default_value_t = ptp_core::oracle::DEFAULT_NODE_BUDGET)]
    pub budget: u64,
    /// CSV report path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, value_enum)]
    pub env: EnvKind,
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long, default_value_t = ptp_core::oracle::DEFAULT_NODE_BUDGET)]
    pub budget: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(required = true)]
    pub metrics: Vec<PathBuf>,
    /// Episodes per bucket.
    #[arg(long, default_value_t = 100)]
    pub bucket: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Resolves relative output paths against `$PTP_OUT` when it is set.
pub fn out_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(root) if p.is_relative() => Path::new(&root).join(p),
        _ => p.to_path_buf(),
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Oracle(a) => commands::oracle(&a),
        Command::Plotdata(a) => plotdata::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
