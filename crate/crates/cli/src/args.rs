use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

/// Battery arbitrage backtesting on day-ahead and balancing market prices.
#[derive(Debug, Parser)]
#[command(name = "bessarb", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Output directory, created if absent [default: out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps; 0 picks one per core [default: 0]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Report files to write [default: both]
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for synthetic data [default: 1]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON document of option values; command-line flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Market {
    Dam,
    Bm,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Forecaster {
    /// Actual prices plus seeded noise per quantile level
    Synthetic,
    /// Walk-forward nearest-neighbour quantiles from lagged prices
    Knn,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded synthetic prices and quantile forecasts
    Gen(GenArgs),
    /// Run one strategy and quantile pair over a dataset
    Backtest(BacktestArgs),
    /// Run every strategy and pair over one or more datasets
    Sweep(SweepArgs),
    /// Perfect-foresight and optimal-dispatch benchmarks per window
    Pf(PfArgs),
    /// Pinball loss of forecasts against actual prices
    Score(ScoreArgs),
    /// Multi-year returns and breakeven years for catalog batteries
    Econ(EconArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub market: Option<Market>,
    /// Days of data [default: 30]
    #[arg(long)]
    pub days: Option<usize>,
    /// Forecast noise in EUR/MWh; 0 makes forecasts equal actuals [default: 5]
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long, value_enum)]
    pub forecaster: Option<Forecaster>,
    /// Candidate neighbour counts for the KNN forecaster
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    /// Training span of the KNN forecaster in days [default: 60]
    #[arg(long)]
    pub train_days: Option<i64>,
}

/// Where a dataset's CSV files are. `--data DIR` looks for `actuals.csv`
/// and `forecasts.csv` (single market) or their `dam_`/`bm_` prefixed forms
/// (dual); explicit paths win.
#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long, value_enum)]
    pub market: Option<Market>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub actuals: Option<PathBuf>,
    #[arg(long)]
    pub forecasts: Option<PathBuf>,
    #[arg(long)]
    pub dam_actuals: Option<PathBuf>,
    #[arg(long)]
    pub dam_forecasts: Option<PathBuf>,
    #[arg(long)]
    pub bm_actuals: Option<PathBuf>,
    #[arg(long)]
    pub bm_forecasts: Option<PathBuf>,
    /// Forecast model name used in reports [default: model]
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Battery spec JSON [default: 1 MWh, 1 MWh per period, 98% charge, 80% discharge efficiency]
    #[arg(long)]
    pub battery: Option<PathBuf>,
    /// conservative | single-curve [default: conservative]
    #[arg(long)]
    pub pair_rule: Option<String>,
    /// Start each window from the previous window's final charge
    #[arg(long)]
    pub carry_state: bool,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// ts1 | ts2 | ts3 [default: ts3]
    #[arg(long)]
    pub strategy: Option<String>,
    /// Quantile pair `sell:buy` [default: 0.5:0.5]
    #[arg(long)]
    pub pair: Option<String>,
    /// Also write the planned orders of every window
    #[arg(long)]
    pub schedules: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// `market:model:dir`, repeatable; otherwise the single dataset of the
    /// data flags
    #[arg(long = "dataset")]
    pub datasets: Vec<String>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated [default: ts1,ts2,ts3]
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
    /// Comma-separated `sell:buy` pairs [default: the seven reference pairs]
    #[arg(long, value_delimiter = ',')]
    pub pairs: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct PfArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub battery: Option<PathBuf>,
    /// Comma-separated [default: ts1,ts2,ts3]
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct EconArgs {
    /// Comma-separated catalog names [default: every battery]
    #[arg(long, value_delimiter = ',')]
    pub batteries: Option<Vec<String>>,
    /// Extra catalog JSON; entries replace built-in ones of the same name
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Base annual revenue in EUR for every battery
    #[arg(long, allow_hyphen_values = true)]
    pub revenue: Option<String>,
    /// Backtest report JSON whose realized profit is annualized
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Scale the report's revenue by capacity instead of re-running
    #[arg(long)]
    pub scale_linear: bool,
    /// Capacity of the battery behind `--report` [default: 1]
    #[arg(long)]
    pub reference_capacity_mwh: Option<String>,
    /// Overrides the span recorded in the report
    #[arg(long)]
    pub span_days: Option<f64>,
    /// With data flags: re-run TS3 per battery at this pair [default: 0.5:0.5]
    #[arg(long)]
    pub pair: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
    /// linear | compound [default: linear]
    #[arg(long)]
    pub degradation_mode: Option<String>,
    /// linear | compound [default: linear]
    #[arg(long)]
    pub escalation_mode: Option<String>,
}
