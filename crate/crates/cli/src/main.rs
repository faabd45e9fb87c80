mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Polar code construction and analysis on the binary erasure channel.
#[derive(Debug, Parser)]
#[command(name = "polarbec", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a candidate eigenfunction against the scaling criterion.
    Criterion(CriterionArgs),
    /// Estimate the scaling exponent from the iterates g_n.
    MuEstimate(MuEstimateArgs),
    /// Construct a polar code and write its spec and report.
    Construct(ConstructArgs),
    /// Trace the achievable (beta', 1/mu') frontier.
    Frontier(FrontierArgs),
    /// Monte-Carlo block error rate of a constructed code.
    Simulate(SimulateArgs),
    /// Numeric checks of the linear bound and curve containment.
    Corollaries(CorollariesArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Criterion(_) => "criterion",
            Command::MuEstimate(_) => "mu-estimate",
            Command::Construct(_) => "construct",
            Command::Frontier(_) => "frontier",
            Command::Simulate(_) => "simulate",
            Command::Corollaries(_) => "corollaries",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// TOML file with defaults for this subcommand; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CriterionArgs {
    /// Exponent of the candidate h(x) = (x(1-x))^alpha, in (0, 1).
    #[arg(long, default_value_t = 0.64)]
    pub alpha: f64,
    /// CSV of `xi,h` samples on [0, 1] to use instead of the power family.
    #[arg(long)]
    pub tabulated: Option<PathBuf>,
    /// Grid intervals for the ratio scan (at least 1000).
    #[arg(long, default_value_t = 10_000)]
    pub grid: usize,
    /// Also write the ratio curve as `xi,ratio` CSV.
    #[arg(long)]
    pub ratio_csv: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MuEstimateArgs {
    /// Left end of the initial indicator interval.
    #[arg(long, default_value_t = 0.01)]
    pub a: f64,
    /// Right end of the initial indicator interval.
    #[arg(long, default_value_t = 0.99)]
    pub b: f64,
    /// Number of iterations.
    #[arg(long, default_value_t = 30)]
    pub steps: usize,
    /// Grid intervals (at least 4096).
    #[arg(long, default_value_t = 8192)]
    pub grid: usize,
    /// Erasure probability at which g_n is sampled.
    #[arg(long, default_value_t = 0.5)]
    pub z0: f64,
    /// First iterate in the fit window; the last half when absent.
    #[arg(long)]
    pub window_start: Option<usize>,
    /// Compare g_n(z0) with exact level counts for n up to this level.
    #[arg(long)]
    pub exact_check: Option<u32>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Multipocket,
    Classical,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ConstructArgs {
    #[arg(long, value_enum, default_value_t = Method::Multipocket)]
    pub method: Method,
    /// Erasure probability of the underlying channel.
    #[arg(long, default_value_t = 0.5)]
    pub z0: f64,
    /// Level: the block length is 2^n.
    #[arg(long, default_value_t = 20)]
    pub n: u32,
    /// Error exponent beta' in [0, 1/2].
    #[arg(long, default_value_t = 0.25)]
    pub beta_p: f64,
    /// Gap exponent mu' > mu_star.
    #[arg(long, default_value_t = 8.0)]
    pub mu_p: f64,
    /// Scaling exponent bound mu_star > 2.
    #[arg(long, default_value_t = 3.627)]
    pub mu_star: f64,
    /// Number of pockets D.
    #[arg(long, default_value_t = 8)]
    pub d: u32,
    /// Recruit threshold base P_ub in (0, 1); default 2^-10.
    #[arg(long, default_value_t = 0.0009765625)]
    pub p_ub: f64,
    /// Explicit pocket levels as comma-separated fractions of n.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    /// Classical: fraction of channels to keep.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Classical: largest admissible sum of selected erasures.
    #[arg(long)]
    pub max_sum_erasure: Option<f64>,
    /// Where to write the code spec.
    #[arg(long)]
    pub spec_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FrontierArgs {
    #[arg(long, default_value_t = 3.627)]
    pub mu_star: f64,
    /// Number of frontier samples over 1/mu' in [0, 1/mu_star].
    #[arg(long, default_value_t = 53)]
    pub samples: usize,
    /// Grid points for the worst-case search over pi.
    #[arg(long, default_value_t = 1000)]
    pub pi_grid: usize,
    /// Evaluate at the ordinates of the bundled reference frontier instead.
    #[arg(long)]
    pub reference_grid: bool,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Code spec file written by `construct`.
    #[arg(long)]
    pub spec: PathBuf,
    /// Channel erasure probability; the spec's own z0 when absent.
    #[arg(long)]
    pub z0: Option<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Trials per reported row.
    #[arg(long, default_value_t = 10_000)]
    pub block: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorollariesArgs {
    #[arg(long, default_value_t = 3.627)]
    pub mu_star: f64,
    /// Grid points for both checks (at least 1000).
    #[arg(long, default_value_t = 10_000)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

fn parse(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let matches = Cli::command().try_get_matches_from(&argv)?;
    let extra = match config::extra_args(&matches) {
        Ok(extra) => extra,
        Err(msg) => return Err(Cli::command().error(clap::error::ErrorKind::InvalidValue, msg)),
    };
    let mut full = argv;
    full.extend(extra);
    Cli::try_parse_from(full)
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match commands::run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed downstream pipe is not worth a report
        Err(e) if e.kind == "broken-pipe" => ExitCode::from(e.code),
        Err(e) => {
            eprintln!("{}", e.to_json(cli.command.name()));
            ExitCode::from(e.code)
        }
    }
}
