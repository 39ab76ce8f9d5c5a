//! Thin command-line front end: `run` executes one experiment, `sweep` grids
//! over aggregators and filter strengths, `verify` runs the built-in
//! correctness suites. All heavy lifting lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graphfed::config::AggregatorKind;
use graphfed::runner;
use graphfed::ExperimentConfig;

#[derive(Parser)]
#[command(name = "graphfed", version, about = "Graph-filtered federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write metrics.csv + summary.json.
    Run(RunArgs),
    /// Run a grid over aggregators and mu_s values, one CSV per cell.
    Sweep(SweepArgs),
    /// Run the oracle-equivalence and correctness suites.
    Verify,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AggregatorArg {
    Fedavg,
    Gfedfilt,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Communication-round override.
    #[arg(long)]
    rounds: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Aggregation rule override.
    #[arg(long)]
    aggregator: Option<AggregatorArg>,
    /// Filter smoothing parameter override.
    #[arg(long = "mu-s")]
    mu_s: Option<f64>,
    /// Enable or disable the per-round communication optimizer.
    #[arg(long)]
    optimize: Option<Switch>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Filter strengths for the G-Fedfilt cells (repeatable).
    #[arg(long = "mu-s", default_values_t = vec![0.1, 1.0, 10.0, 100.0])]
    mu_s: Vec<f64>,
    /// Enable or disable the per-round communication optimizer.
    #[arg(long)]
    optimize: Option<Switch>,
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, graphfed::Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::parse_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    if let Some(rounds) = common.rounds {
        cfg.run.rounds = rounds;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<(), graphfed::Error> {
    let mut cfg = load_config(&args.common)?;
    if let Some(aggregator) = args.aggregator {
        cfg.run.aggregator = match aggregator {
            AggregatorArg::Fedavg => AggregatorKind::FedAvg,
            AggregatorArg::Gfedfilt => AggregatorKind::GFedfilt,
        };
    }
    if let Some(mu_s) = args.mu_s {
        cfg.run.mu_s = mu_s;
    }
    if let Some(optimize) = args.optimize {
        cfg.run.optimize = optimize == Switch::On;
    }
    cfg.validate()?;
    let outputs = runner::run_to_dir(&cfg, &args.common.out)?;
    println!("manifest: {}", outputs.manifest.display());
    println!("metrics:  {}", outputs.csv.display());
    println!("summary:  {}", outputs.summary.display());
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), graphfed::Error> {
    let mut cfg = load_config(&args.common)?;
    if let Some(optimize) = args.optimize {
        cfg.run.optimize = optimize == Switch::On;
    }
    cfg.validate()?;
    let outputs = runner::sweep_to_dir(&cfg, &args.common.out, &args.mu_s)?;
    for o in outputs {
        println!("cell: {}", o.csv.display());
    }
    Ok(())
}

fn verify() -> bool {
    let mut all_passed = true;
    for check in runner::verify_suites() {
        let status = if check.passed { "PASS" } else { "FAIL" };
        println!("{status} {}: {}", check.name, check.detail);
        all_passed &= check.passed;
    }
    all_passed
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::Verify => {
            return if verify() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
