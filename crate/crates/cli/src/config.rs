//! Option values from the command line and an optional JSON config file.
//! Keys of the file are the long flag names in snake case; a flag given on
//! the command line wins over the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::args::{Cli, Command, DataArgs, Forecaster, Format, Market, RunArgs};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub format: Option<Format>,
    pub seed: Option<u64>,

    pub market: Option<Market>,
    pub days: Option<usize>,
    pub noise_sd: Option<f64>,
    pub forecaster: Option<Forecaster>,
    pub k_grid: Option<Vec<usize>>,
    pub train_days: Option<i64>,

    pub data: Option<PathBuf>,
    pub actuals: Option<PathBuf>,
    pub forecasts: Option<PathBuf>,
    pub dam_actuals: Option<PathBuf>,
    pub dam_forecasts: Option<PathBuf>,
    pub bm_actuals: Option<PathBuf>,
    pub bm_forecasts: Option<PathBuf>,
    pub model: Option<String>,
    pub datasets: Option<Vec<String>>,

    pub battery: Option<PathBuf>,
    pub pair_rule: Option<String>,
    pub carry_state: Option<bool>,
    pub strategy: Option<String>,
    pub strategies: Option<Vec<String>>,
    pub pair: Option<String>,
    pub pairs: Option<Vec<String>>,
    pub schedules: Option<bool>,

    pub batteries: Option<Vec<String>>,
    pub catalog: Option<PathBuf>,
    pub revenue: Option<String>,
    pub report: Option<PathBuf>,
    pub scale_linear: Option<bool>,
    pub reference_capacity_mwh: Option<String>,
    pub span_days: Option<f64>,
    pub degradation_mode: Option<String>,
    pub escalation_mode: Option<String>,
}

/// A set flag as `Some(true)`, an absent one as "not given".
fn flag(b: bool) -> Option<bool> {
    b.then_some(true)
}

macro_rules! overlay {
    ($top:ident, $base:ident; $($field:ident),* $(,)?) => {
        Settings { $($field: $top.$field.or($base.$field),)* }
    };
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config("MissingFile", format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config("InvalidConfig", format!("{}: {e}", path.display())))
    }

    /// Flags of `cli`, then the file behind `--config` for anything unset.
    pub fn resolve(cli: &Cli) -> Result<Self> {
        let flags = Settings::from_cli(cli);
        match &cli.global.config {
            Some(path) => Ok(flags.over(Settings::load(path)?)),
            None => Ok(flags),
        }
    }

    fn over(self, base: Settings) -> Settings {
        let top = self;
        overlay!(top, base;
            out, jobs, format, seed, market, days, noise_sd, forecaster, k_grid, train_days,
            data, actuals, forecasts, dam_actuals, dam_forecasts, bm_actuals, bm_forecasts, model, datasets,
            battery, pair_rule, carry_state, strategy, strategies, pair, pairs, schedules,
            batteries, catalog, revenue, report, scale_linear, reference_capacity_mwh, span_days,
            degradation_mode, escalation_mode,
        )
    }

    fn with_data(mut self, d: &DataArgs) -> Self {
        self.market = d.market;
        self.data = d.data.clone();
        self.actuals = d.actuals.clone();
        self.forecasts = d.forecasts.clone();
        self.dam_actuals = d.dam_actuals.clone();
        self.dam_forecasts = d.dam_forecasts.clone();
        self.bm_actuals = d.bm_actuals.clone();
        self.bm_forecasts = d.bm_forecasts.clone();
        self.model = d.model.clone();
        self
    }

    fn with_run(mut self, r: &RunArgs) -> Self {
        self.battery = r.battery.clone();
        self.pair_rule = r.pair_rule.clone();
        self.carry_state = flag(r.carry_state);
        self
    }

    fn from_cli(cli: &Cli) -> Self {
        let g = &cli.global;
        let s = Settings {
            out: g.out.clone(),
            jobs: g.jobs,
            format: g.format,
            seed: g.seed,
            ..Settings::default()
        };
        match &cli.command {
            Command::Gen(a) => Settings {
                market: a.market,
                days: a.days,
                noise_sd: a.noise_sd,
                forecaster: a.forecaster,
                k_grid: a.k_grid.clone(),
                train_days: a.train_days,
                ..s
            },
            Command::Backtest(a) => Settings {
                strategy: a.strategy.clone(),
                pair: a.pair.clone(),
                schedules: flag(a.schedules),
                ..s.with_data(&a.data).with_run(&a.run)
            },
            Command::Sweep(a) => Settings {
                datasets: (!a.datasets.is_empty()).then(|| a.datasets.clone()),
                strategies: a.strategies.clone(),
                pairs: a.pairs.clone(),
                ..s.with_data(&a.data).with_run(&a.run)
            },
            Command::Pf(a) => Settings {
                battery: a.battery.clone(),
                strategies: a.strategies.clone(),
                ..s.with_data(&a.data)
            },
            Command::Score(a) => s.with_data(&a.data),
            Command::Econ(a) => Settings {
                batteries: a.batteries.clone(),
                catalog: a.catalog.clone(),
                revenue: a.revenue.clone(),
                report: a.report.clone(),
                scale_linear: flag(a.scale_linear),
                reference_capacity_mwh: a.reference_capacity_mwh.clone(),
                span_days: a.span_days,
                pair: a.pair.clone(),
                degradation_mode: a.degradation_mode.clone(),
                escalation_mode: a.escalation_mode.clone(),
                ..s.with_data(&a.data)
            },
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Both)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"seed": 9, "days": 12, "jobs": 3, "carry_state": true}"#).unwrap();
        let cli = Cli::parse_from(["bessarb", "gen", "--days", "4", "--config", path.to_str().unwrap()]);
        let s = Settings::resolve(&cli).unwrap();
        assert_eq!((s.seed, s.days, s.jobs), (Some(9), Some(4), Some(3)));
        assert_eq!(s.carry_state, Some(true));
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"sed": 9}"#).unwrap();
        let cli = Cli::parse_from(["bessarb", "gen", "--config", path.to_str().unwrap()]);
        assert_eq!(Settings::resolve(&cli).unwrap_err().exit_code(), 2);
    }
}
