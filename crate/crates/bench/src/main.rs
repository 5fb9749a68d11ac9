use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wbc_bench::experiments::{self, ExperimentKind, ExperimentPlan};
use wbc_bench::{config, model_file, BenchError, ClockKind};
use wbc_core::model::planar9;

#[derive(Parser)]
#[command(name = "wbc-bench", version, about = "Accuracy and cost experiments for the whole-body QP controller")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single run with the configured parameters.
    Baseline(Common),
    /// Tracking errors as functions of the acceleration noise level.
    NoiseSweep(Common),
    /// Errors and solver time for varying matrix update ratios.
    RatioSweep(Common),
    /// Gain tuning and ratio selection for varying control frequencies.
    FreqSweep(Common),
}

#[derive(Args)]
struct Common {
    /// Robot model file; the built-in planar9 model when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Controller config (TOML); defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Runs per accuracy point.
    #[arg(long, default_value_t = experiments::ACCURACY_REPEATS)]
    repeats: usize,
    /// Wall-clock runs per timing point.
    #[arg(long, default_value_t = experiments::TIMING_REPEATS)]
    timing_repeats: usize,
    /// Comma-separated grid of noise levels, update ratios or frequencies.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// `none` zeroes timing columns for byte-reproducible output.
    #[arg(long, value_enum, default_value_t = ClockKind::Wall)]
    clock: ClockKind,
}

fn run(kind: ExperimentKind, args: Common) -> Result<Vec<PathBuf>, BenchError> {
    let model = match &args.model {
        Some(p) => model_file::load(p)?,
        None => planar9(),
    };
    let mut base = match &args.config {
        Some(p) => config::load_config(p)?,
        None => Default::default(),
    };
    if let Some(s) = args.seed {
        base.seed = s;
    }
    let mut plan = ExperimentPlan::new(kind, base, args.out);
    if let Some(g) = args.grid {
        plan.grid = g;
    }
    plan.repeats = args.repeats;
    plan.timing_repeats = args.timing_repeats;
    plan.clock = args.clock;
    experiments::execute(&model, &plan)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Baseline(a) => (ExperimentKind::Baseline, a),
        Command::NoiseSweep(a) => (ExperimentKind::NoiseSweep, a),
        Command::RatioSweep(a) => (ExperimentKind::RatioSweep, a),
        Command::FreqSweep(a) => (ExperimentKind::FreqSweep, a),
    };
    match run(kind, args) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("wbc-bench: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
