use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, ValueEnum};

use rsma_swipt::ao::Strategy;
use rsma_swipt::experiments::{
    default_eth_grid, default_weight_grid, run_sweep, Experiment, SweepSpec,
};
use rsma_swipt::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    /// Full Monte-Carlo averaging (100 realizations unless overridden).
    Repro,
    /// Quick run for continuous integration (10 realizations).
    Ci,
}

/// Monte-Carlo sweeps over transmit strategies: rate-energy tradeoff,
/// two-user rate region, and per-iteration convergence traces.
#[derive(Debug, Parser)]
#[command(name = "sweep", version, about)]
struct Args {
    /// Which experiment to run: rate-energy, rate-region, or convergence.
    #[arg(long)]
    experiment: String,

    /// Scenario config file (TOML). Defaults to the built-in scenario.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Comma-separated strategy labels, e.g. "RSMA+RIS,SDMA,NOMA+RIS".
    /// Defaults to all six.
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<String>,

    /// Energy-threshold grid in microwatts (rate-energy experiment).
    /// Defaults to 0..25 µW in 5 µW steps.
    #[arg(long = "eth-grid", value_delimiter = ',')]
    eth_grid: Vec<f64>,

    /// Channel realizations per grid point; overrides the mode default.
    #[arg(long)]
    realizations: Option<usize>,

    /// Base RNG seed; realization i uses stream i of this seed.
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long, value_enum, default_value = "repro")]
    mode: Mode,

    /// Output directory for results.csv, summary.json, manifest.json and
    /// trace files. Created if missing.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();

    let experiment = Experiment::parse(&args.experiment)?;

    let config = match &args.config {
        Some(path) => ScenarioConfig::from_toml_file(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => ScenarioConfig::default(),
    };

    let strategies: Vec<Strategy> = if args.strategies.is_empty() {
        Strategy::ALL.to_vec()
    } else {
        args.strategies
            .iter()
            .map(|s| Strategy::parse(s))
            .collect::<Result<_, _>>()?
    };

    let eth_grid: Vec<f64> = if args.eth_grid.is_empty() {
        default_eth_grid()
    } else {
        if args.eth_grid.iter().any(|&e| !e.is_finite() || e < 0.0) {
            bail!("energy thresholds must be finite and nonnegative");
        }
        args.eth_grid.iter().map(|uw| uw * 1e-6).collect()
    };

    let realizations = match (args.realizations, experiment) {
        (Some(n), _) => n,
        (None, Experiment::Convergence) => 1,
        (None, _) => match args.mode {
            Mode::Repro => 100,
            Mode::Ci => 10,
        },
    };

    let spec = SweepSpec {
        experiment,
        seed: args.seed.unwrap_or(config.rng_seed),
        config,
        strategies,
        eth_grid,
        weight_grid: default_weight_grid(),
        realizations,
    };

    let rows = run_sweep(&spec, &args.out)?;
    let non_converged = rows.iter().filter(|r| !r.converged).count();
    println!(
        "wrote {} rows to {} ({} non-converged)",
        rows.len(),
        args.out.display(),
        non_converged
    );
    Ok(())
}
