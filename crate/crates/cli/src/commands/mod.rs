/// `println!` that tolerates a closed stdout pipe.
macro_rules! emit {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

mod backtest;
mod econ;
mod gen;
mod pf;
mod score;
mod sweep;

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bessarb::battery::BatterySpec;
use bessarb::evaluation::Dataset;
use bessarb::market_data::{parse_forecast_csv, parse_price_csv, MarketKind, PriceSeries, QuantileForecast};
use bessarb::strategies::{reference_pairs, PairRule, QuantilePair, Strategy};
use clap::ValueEnum;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::{Cli, Command, Market};
use crate::config::Settings;
use crate::error::{CliError, Result};

pub fn run(cli: &Cli) -> Result<()> {
    let s = Settings::resolve(cli)?;
    let out = s.out_dir();
    fs::create_dir_all(&out)?;
    match &cli.command {
        Command::Gen(_) => gen::run(&s, &out),
        Command::Backtest(_) => backtest::run(&s, &out),
        Command::Sweep(_) => sweep::run(&s, &out),
        Command::Pf(_) => pf::run(&s, &out),
        Command::Score(_) => score::run(&s, &out),
        Command::Econ(_) => econ::run(&s, &out),
    }
}

fn warn(w: impl Display) {
    eprintln!("warning: {w}");
}

fn write_file(out: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf> {
    let path = out.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::data("Io", format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn write_json<T: Serialize + ?Sized>(out: &Path, name: &str, value: &T) -> Result<PathBuf> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_file(out, name, text.as_bytes())
}

/// Renders a CSV writer call into bytes.
fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn existing(path: PathBuf, flag: &str) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::config("MissingFile", format!("--{flag}: {} does not exist", path.display())))
    }
}

/// The explicit path, else `name` inside `--data`.
fn input_path(explicit: &Option<PathBuf>, dir: &Option<PathBuf>, name: &str, flag: &str) -> Result<PathBuf> {
    match (explicit, dir) {
        (Some(p), _) => existing(p.clone(), flag),
        (None, Some(d)) => existing(d.join(name), flag),
        (None, None) => Err(CliError::config("MissingInput", format!("give --{flag} or --data"))),
    }
}

fn market_kind(m: Market) -> Option<MarketKind> {
    match m {
        Market::Dam => Some(MarketKind::Dam),
        Market::Bm => Some(MarketKind::Bm),
        Market::Dual => None,
    }
}

fn label(m: Market) -> &'static str {
    match m {
        Market::Dam => "DAM",
        Market::Bm => "BM",
        Market::Dual => "DUAL",
    }
}

fn read_prices(path: &Path, kind: MarketKind) -> Result<Vec<PriceSeries>> {
    let parsed = parse_price_csv(path, kind)?;
    parsed.warnings.iter().for_each(warn);
    if parsed.series.is_empty() {
        return Err(CliError::data("EmptyData", format!("{}: no complete windows", path.display())));
    }
    Ok(parsed.series)
}

fn read_forecasts(path: &Path, kind: MarketKind) -> Result<Vec<QuantileForecast>> {
    let parsed = parse_forecast_csv(path, kind)?;
    parsed.warnings.iter().for_each(warn);
    Ok(parsed.forecasts)
}

/// Actual prices of a dataset: one market, or DAM then BM for dual.
struct Actuals {
    market: Market,
    first: Vec<PriceSeries>,
    bm: Vec<PriceSeries>,
}

fn load_actuals(s: &Settings) -> Result<Actuals> {
    let market = s.market.unwrap_or(Market::Dam);
    Ok(match market_kind(market) {
        Some(kind) => Actuals {
            market,
            first: read_prices(&input_path(&s.actuals, &s.data, "actuals.csv", "actuals")?, kind)?,
            bm: Vec::new(),
        },
        None => Actuals {
            market,
            first: read_prices(&input_path(&s.dam_actuals, &s.data, "dam_actuals.csv", "dam-actuals")?, MarketKind::Dam)?,
            bm: read_prices(&input_path(&s.bm_actuals, &s.data, "bm_actuals.csv", "bm-actuals")?, MarketKind::Bm)?,
        },
    })
}

fn load_dataset_from(market: Market, model: &str, s: &Settings) -> Result<Dataset> {
    Ok(match market_kind(market) {
        Some(kind) => {
            let forecasts = input_path(&s.forecasts, &s.data, "forecasts.csv", "forecasts")?;
            let actuals = input_path(&s.actuals, &s.data, "actuals.csv", "actuals")?;
            Dataset::single(model, read_prices(&actuals, kind)?, read_forecasts(&forecasts, kind)?)?
        }
        None => {
            let paths = [
                input_path(&s.dam_actuals, &s.data, "dam_actuals.csv", "dam-actuals")?,
                input_path(&s.dam_forecasts, &s.data, "dam_forecasts.csv", "dam-forecasts")?,
                input_path(&s.bm_actuals, &s.data, "bm_actuals.csv", "bm-actuals")?,
                input_path(&s.bm_forecasts, &s.data, "bm_forecasts.csv", "bm-forecasts")?,
            ];
            Dataset::dual(
                model,
                read_prices(&paths[0], MarketKind::Dam)?,
                read_forecasts(&paths[1], MarketKind::Dam)?,
                read_prices(&paths[2], MarketKind::Bm)?,
                read_forecasts(&paths[3], MarketKind::Bm)?,
            )?
        }
    })
}

fn load_dataset(s: &Settings) -> Result<Dataset> {
    let model = s.model.clone().unwrap_or_else(|| "model".into());
    load_dataset_from(s.market.unwrap_or(Market::Dam), &model, s)
}

/// Whether any data flag was given.
fn has_data(s: &Settings) -> bool {
    s.data.is_some() || s.actuals.is_some() || s.dam_actuals.is_some() || s.bm_actuals.is_some()
}

/// `market:model:dir`.
fn parse_dataset_spec(spec: &str) -> Result<Dataset> {
    let bad = || CliError::config("InvalidDataset", format!("`{spec}` is not of the form market:model:dir"));
    let mut parts = spec.splitn(3, ':');
    let (Some(m), Some(model), Some(dir)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(bad());
    };
    let market = Market::from_str(m, true).map_err(|_| bad())?;
    if model.is_empty() || dir.is_empty() {
        return Err(bad());
    }
    let s = Settings {
        data: Some(PathBuf::from(dir)),
        ..Settings::default()
    };
    load_dataset_from(market, model, &s)
}

fn load_spec(path: &Option<PathBuf>) -> Result<BatterySpec> {
    match path {
        None => Ok(BatterySpec::reference()),
        Some(p) => {
            let p = existing(p.clone(), "battery")?;
            Ok(BatterySpec::from_json(&fs::read_to_string(&p)?)?)
        }
    }
}

/// Non-blank entries of a list option.
fn entries(list: &[String]) -> impl Iterator<Item = &str> {
    list.iter().map(|x| x.trim()).filter(|x| !x.is_empty())
}

fn parse_strategies(list: &Option<Vec<String>>) -> Result<Vec<Strategy>> {
    let Some(list) = list else {
        return Ok(Strategy::ALL.to_vec());
    };
    let out = entries(list).map(Strategy::from_str).collect::<std::result::Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err(CliError::config("InvalidSweep", "empty strategy list"));
    }
    Ok(out)
}

fn parse_pairs(list: &Option<Vec<String>>) -> Result<Vec<QuantilePair>> {
    let Some(list) = list else {
        return Ok(reference_pairs());
    };
    let out = entries(list).map(QuantilePair::from_str).collect::<std::result::Result<Vec<_>, _>>()?;
    if out.is_empty() {
        return Err(CliError::config("InvalidSweep", "empty pair list"));
    }
    Ok(out)
}

fn parse_pair(pair: &Option<String>) -> Result<QuantilePair> {
    Ok(pair.as_deref().map_or(Ok(QuantilePair::median()), QuantilePair::from_str)?)
}

fn pair_rule(s: &Settings) -> Result<PairRule> {
    Ok(s.pair_rule.as_deref().map_or(Ok(PairRule::default()), PairRule::from_str)?)
}

fn opt_money(x: Option<rust_decimal::Decimal>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}
