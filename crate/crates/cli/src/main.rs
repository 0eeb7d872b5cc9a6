//! `trtm`: time-aware, risk-based test suite minimization from the command line.

mod commands;
mod compare;
mod failure;
mod manifest;

use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand};
use trtm_core::dependency_graph::EdgeFormat;
use trtm_core::minimizer::Budget;
use trtm_core::risk_aggregation::AggregationOp;
use trtm_core::temporal_risk::{ChangeMetric, Horizon};

use crate::failure::{ExitCode, Failure};

#[derive(Debug, Parser)]
#[command(name = "trtm", version, about = "Risk-based test suite minimization")]
struct Cli {
    /// Worker threads for per-version evaluation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the per-class risk table as CSV.
    Score(ScoreArgs),
    /// Rank tests and keep the requested share of them.
    Minimize(MinimizeArgs),
    /// Run one configuration over labeled versions.
    Evaluate(EvaluateArgs),
    /// Run a grid of configurations over labeled versions.
    Sweep(SweepArgs),
    /// Compare two outcome files from `evaluate`.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct RiskArgs {
    #[arg(long, default_value = "extent")]
    metric: ChangeMetric,
    /// Half-life in days, or `static` for undecayed counts.
    #[arg(long, default_value = "32")]
    horizon: Horizon,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Call-graph format, overriding the manifest.
    #[arg(long)]
    format: Option<EdgeFormat>,
    /// Directory for output files, overriding the manifest.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    manifest: PathBuf,
    #[command(flatten)]
    risk: RiskArgs,
    /// Reference time in seconds since the epoch (default: the label's `as_of`).
    #[arg(long)]
    as_of: Option<i64>,
    /// Directory for `risk.csv` (default: the manifest's, else standard output).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectionArgs {
    #[arg(long, default_value = "gmean")]
    aggregate: AggregationOp,
    /// Share of tests to keep: a fraction in (0, 1] or a percentage like `50%`.
    #[arg(long, default_value = "0.5")]
    budget: Budget,
}

#[derive(Debug, Args)]
struct MinimizeArgs {
    manifest: PathBuf,
    #[command(flatten)]
    risk: RiskArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    /// Reference time in seconds since the epoch (default: the label's `as_of`).
    #[arg(long)]
    as_of: Option<i64>,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(required = true)]
    manifests: Vec<PathBuf>,
    #[command(flatten)]
    risk: RiskArgs,
    #[command(flatten)]
    selection: SelectionArgs,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(required = true)]
    manifests: Vec<PathBuf>,
    /// Restrict the grid; repeatable. Defaults to both metrics.
    #[arg(long = "metric")]
    metrics: Vec<ChangeMetric>,
    /// Restrict the grid; repeatable. Defaults to half-lives 1, 2, 4, ..., 512.
    #[arg(long = "horizon")]
    horizons: Vec<Horizon>,
    /// Restrict the grid; repeatable. Defaults to all four operators.
    #[arg(long = "aggregate")]
    operators: Vec<AggregationOp>,
    /// Repeatable. Defaults to 25%, 50% and 75%.
    #[arg(long = "budget")]
    budgets: Vec<Budget>,
    /// Add the undecayed baseline to the horizons.
    #[arg(long)]
    include_static: bool,
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Outcomes CSV of the candidate configuration.
    a: PathBuf,
    /// Outcomes CSV of the baseline.
    b: PathBuf,
    /// Family size for the Bonferroni correction.
    #[arg(long, default_value_t = 2)]
    bonferroni_m: usize,
    /// Write the JSON report here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot start worker pool: {e}")))?;
    }
    match cli.command {
        Command::Score(args) => commands::score(args),
        Command::Minimize(args) => commands::minimize(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Sweep(args) => commands::sweep(args),
        Command::Compare(args) => compare::compare(args),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() {
                ExitCode::Usage as i32
            } else {
                0
            };
            let _ = err.print();
            process::exit(code);
        }
    };
    if let Err(failure) = run(cli) {
        eprintln!("error: {failure}");
        process::exit(failure.code as i32);
    }
}
