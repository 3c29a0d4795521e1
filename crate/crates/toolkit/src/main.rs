use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dbacs_toolkit::commands::{self, Context, Timer};
use dbacs_toolkit::{ModelKind, Overrides, RunConfig, ToolResult};

/// Heterogeneous domain adaptation experiments: data generation,
/// preprocessing, DBACS and linear baselines, evaluation and matching.
#[derive(Parser)]
#[command(name = "dbacs", version)]
struct Cli {
    /// Run configuration (JSON). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory; overrides `output` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for both data generation and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Folds processed in parallel (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Architecture preset: desk or paper-arch.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic two-equipment benchmark.
    GenData,
    /// Drop constant channels and outliers, resample to a common length.
    Preprocess,
    /// Train one model family on every fold.
    Train {
        #[arg(value_enum)]
        model: ModelKind,
    },
    /// Per-fold metrics from trained checkpoints.
    Eval {
        /// Model families to evaluate (default: all).
        #[arg(long, value_enum)]
        model: Vec<ModelKind>,
    },
    /// Equipment-matching report for the configured fold.
    Match,
    /// Aggregate tables, metrics.json and plots.
    Report,
    /// All stages in order.
    Pipeline,
    /// Print the resolved configuration and exit.
    ShowConfig,
}

fn run(cli: Cli) -> ToolResult<()> {
    let base = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides { out: cli.out, seed: cli.seed, preset: cli.preset };
    let cfg = base.resolve(&overrides)?;
    if let Command::ShowConfig = cli.command {
        print!("{}", dbacs_toolkit::dataset_io::to_json_pretty(&cfg));
        return Ok(());
    }
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let ctx = Context::new(cfg, jobs)?;
    let mut timer = Timer::new();
    match cli.command {
        Command::GenData => timer.stage("gen-data", || commands::gen_data(&ctx))?,
        Command::Preprocess => timer.stage("preprocess", || commands::preprocess(&ctx))?,
        Command::Train { model } => timer.stage(&format!("train {}", model.name()), || commands::train(&ctx, model))?,
        Command::Eval { model } => {
            let kinds = if model.is_empty() { ModelKind::ALL.to_vec() } else { model };
            timer.stage("eval", || commands::eval(&ctx, &kinds))?
        }
        Command::Match => {
            let r = timer.stage("match", || commands::match_groups(&ctx))?;
            println!("nearest-middle fraction {:.3} over {} target channels", r.nearest_middle_fraction, r.gaps.len());
        }
        Command::Report => {
            let r = timer.stage("report", || commands::report(&ctx))?;
            print!("{}", r.table1.to_csv());
        }
        Command::Pipeline => {
            let r = commands::pipeline(&ctx)?;
            print!("{}", r.table1.to_csv());
            println!("wrote {}", ctx.run.metrics().display());
            return Ok(());
        }
        Command::ShowConfig => unreachable!(),
    }
    timer.finish(&ctx.run, "total")
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
