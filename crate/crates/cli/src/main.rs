//! `iniquity-lab`: reproduce equilibrium, inequality and trade-off experiments
//! as CSV or JSON.

mod commands;
mod error;
mod output;
mod random;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use iniquity_core::pigou::Curve;

use crate::error::{CliError, Result};

/// Environment variable that takes precedence over `--seed`.
pub const SEED_VAR: &str = "INIQUITY_LAB_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "iniquity-lab",
    version,
    about = "Income inequality experiments for tolled congestion games"
)]
struct Cli {
    /// Write results here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for sweeps (default: logical cores).
    #[arg(short, long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Social cost, latency or time-unit latency of the tolled Pigou network
    /// against the switch point, with the located minimum.
    PigouSweep(PigouSweepArgs),
    /// Iniquity index of an instance, analytically and by finite differences.
    Iniquity(IniquityArgs),
    /// Optimal allocation of the discrete delay/equality trade-off.
    Tradeoff(TradeoffArgs),
    /// Multiplicative-weights dynamics on a leveled population.
    Learn(LearnArgs),
    /// The two-commodity counterexamples.
    Asym(AsymArgs),
    /// Gini coefficient of a list of values.
    Gini(GiniArgs),
    /// Randomized property checks over many seeded instances.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CurveArg {
    Social,
    Latency,
    Cf1,
}

impl From<CurveArg> for Curve {
    fn from(c: CurveArg) -> Self {
        match c {
            CurveArg::Social => Curve::Social,
            CurveArg::Latency => Curve::Latency,
            CurveArg::Cf1 => Curve::Cf1,
        }
    }
}

#[derive(Debug, Args)]
struct PigouSweepArgs {
    /// Income exponent: `q(x) = (β+1)·x^β`.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Evenly spaced switch points on [0, 1], endpoints included.
    #[arg(long, default_value_t = 101, value_parser = clap::value_parser!(u32).range(2..))]
    points: u32,
    #[arg(long, value_enum, default_value_t = CurveArg::Social)]
    curve: CurveArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Analytic,
    Fd,
    Both,
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["beta", "instance"])))]
struct IniquityArgs {
    /// Pigou network at the optimal toll with income `(β+1)·x^β`.
    #[arg(long)]
    beta: Option<f64>,
    /// JSON file with `network`, `income` and optional `model`.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Both)]
    method: Method,
}

#[derive(Debug, Args)]
struct TradeoffArgs {
    /// JSON file with `quantiles`, `links` and optional `lambda`, `importance`.
    #[arg(long)]
    instance: PathBuf,
    /// Overrides the instance's equality weight.
    #[arg(long)]
    lambda: Option<f64>,
    /// Overrides the weight of travel costs in post-game incomes.
    #[arg(long)]
    importance: Option<f64>,
    /// Also solve by exhaustive enumeration and compare.
    #[arg(long)]
    oracle: bool,
}

#[derive(Debug, Args)]
struct LearnArgs {
    /// JSON network file.
    #[arg(long)]
    network: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    rounds: usize,
    /// Equal-mass income levels drawn from `(β+1)·x^β`.
    #[arg(long, default_value_t = 32)]
    levels: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Weight of travel costs in ex-post incomes.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Fixed learning rate instead of the anytime schedule.
    #[arg(long)]
    eta: Option<f64>,
    /// Randomizes the initial strategies; uniform when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Exit 1 unless play converges to the equilibrium Gini within this gap.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Experiment {
    Fig7,
    Gamma2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct AsymArgs {
    #[arg(long, value_enum)]
    experiment: Experiment,
    #[arg(long, default_value_t = iniquity_core::asymmetric::DEFAULT_ALPHA)]
    alpha: f64,
    /// Comma-separated `x*` values for the second experiment.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Defaults to JSON for fig7 and CSV for gamma2.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct GiniArgs {
    /// Comma-separated nonnegative values.
    #[arg(
        long,
        value_delimiter = ',',
        required = true,
        allow_negative_numbers = true
    )]
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Suite {
    /// Tolls never lower the Gini coefficient.
    Theorem,
    /// Iniquity is invariant under joint scaling of incomes and tolls.
    Scale,
    /// Subset DP against brute force.
    Dp,
    /// No sampled type gains by switching links.
    Equilibrium,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[arg(long, value_enum)]
    suite: Suite,
    #[arg(long, default_value_t = 200)]
    instances: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// `--seed` unless the environment overrides it.
fn effective_seed(flag: Option<u64>) -> Result<Option<u64>> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            CliError::Usage(format!("{SEED_VAR} must be an unsigned integer, got '{v}'"))
        }),
        Err(_) => Ok(flag),
    }
}

fn run(cli: Cli) -> Result<()> {
    let jobs = cli.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))?;
    let out = cli.output.as_deref();
    match cli.command {
        Command::PigouSweep(a) => {
            pool.install(|| commands::pigou_sweep(a.beta, a.points as usize, a.curve.into(), out))
        }
        Command::Iniquity(a) => commands::iniquity(a.beta, a.instance.as_deref(), a.method, out),
        Command::Tradeoff(a) => commands::tradeoff(&a, out),
        Command::Learn(a) => {
            let seed = effective_seed(a.seed)?;
            commands::learn(&a, seed, out)
        }
        Command::Asym(a) => pool.install(|| commands::asym(&a, out)),
        Command::Gini(a) => commands::gini(&a.values, out),
        Command::Check(a) => {
            let seed = effective_seed(Some(a.seed))?.unwrap_or(a.seed);
            pool.install(|| commands::check(a.suite, a.instances, seed, out))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iniquity-lab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
