use std::fs;
use std::path::Path;
use std::str::FromStr;

use bessarb::battery::Energy;
use bessarb::economics::{
    annual_return_curve, annualize_backtest_revenue, annualize_revenue, scale_to_capacity, write_curve_csv, BatteryCatalog,
    BatteryCatalogEntry, EconError, EconSummary, RateMode,
};
use bessarb::evaluation::{run_sweep, Dataset, SweepOptions};
use bessarb::strategies::Strategy;
use rust_decimal::Decimal;
use serde::Deserialize;

use super::{csv_bytes, existing, has_data, load_dataset, pair_rule, parse_pair, write_file, write_json};
use crate::config::Settings;
use crate::error::{CliError, Result};

/// The fields of a backtest report JSON that annualizing needs.
#[derive(Deserialize)]
struct ReportTotals {
    realized_profit: Decimal,
    span_secs: i64,
}

enum Revenue {
    Fixed(Decimal),
    /// Re-run TS3 with each battery's own spec.
    Rerun(Dataset),
    /// Annualized revenue of a battery of the given capacity.
    Scaled(Decimal, Energy),
    Figure,
}

fn decimal(text: &str, flag: &str) -> Result<Decimal> {
    Decimal::from_str(text.trim()).map_err(|_| CliError::config("InvalidNumber", format!("--{flag}: `{text}` is not a number")))
}

fn rate_mode(text: &Option<String>, flag: &str) -> Result<RateMode> {
    match text.as_deref() {
        None | Some("linear") => Ok(RateMode::Linear),
        Some("compound") => Ok(RateMode::Compound),
        Some(other) => Err(CliError::config("InvalidRateMode", format!("--{flag}: `{other}` is not linear or compound"))),
    }
}

fn revenue_source(s: &Settings) -> Result<Revenue> {
    if let Some(r) = &s.revenue {
        return Ok(Revenue::Fixed(decimal(r, "revenue")?));
    }
    if has_data(s) {
        return Ok(Revenue::Rerun(load_dataset(s)?));
    }
    if let Some(path) = &s.report {
        if !s.scale_linear.unwrap_or(false) {
            return Err(CliError::config(
                "MissingRevenueSource",
                "--report is scaled by capacity: add --scale-linear, or pass price data to re-run per battery",
            ));
        }
        let path = existing(path.clone(), "report")?;
        let totals: ReportTotals = serde_json::from_str(&fs::read_to_string(&path)?)
            .map_err(|e| CliError::data("MalformedReport", format!("{}: {e}", path.display())))?;
        let span = match s.span_days {
            Some(d) if d.is_finite() && d > 0.0 => (d * 86_400.0).round() as i64,
            Some(_) => return Err(EconError::ZeroSpan.into()),
            None => totals.span_secs,
        };
        let reference = decimal(s.reference_capacity_mwh.as_deref().unwrap_or("1"), "reference-capacity-mwh")?;
        return Ok(Revenue::Scaled(annualize_revenue(totals.realized_profit, span)?, Energy::from_decimal(reference)));
    }
    Ok(Revenue::Figure)
}

fn base_revenue(b: &BatteryCatalogEntry, source: &Revenue, s: &Settings) -> Result<Decimal> {
    match source {
        Revenue::Fixed(g) => Ok(*g),
        Revenue::Scaled(g, reference) => Ok(scale_to_capacity(*g, *reference, b.battery_spec()?.capacity)?),
        Revenue::Figure => b.figure_implied_revenue().ok_or_else(|| EconError::MissingRevenueSource.into()),
        Revenue::Rerun(dataset) => {
            let opts = SweepOptions {
                rule: pair_rule(s)?,
                carry_state: s.carry_state.unwrap_or(false),
                jobs: s.jobs.unwrap_or(0),
                ..SweepOptions::new(vec![Strategy::Ts3], vec![parse_pair(&s.pair)?], b.battery_spec()?)
            };
            let report = run_sweep(std::slice::from_ref(dataset), &opts)?;
            Ok(annualize_backtest_revenue(&report.cells[0])?)
        }
    }
}

/// Keeps file names to letters, digits, `-` and `_`.
fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn run(s: &Settings, out: &Path) -> Result<()> {
    let mut catalog = BatteryCatalog::builtin();
    if let Some(path) = &s.catalog {
        let path = existing(path.clone(), "catalog")?;
        for entry in BatteryCatalog::from_json(&fs::read_to_string(&path)?)?.batteries {
            catalog.upsert(entry)?;
        }
    }
    let chosen: Vec<&BatteryCatalogEntry> = match &s.batteries {
        None => catalog.batteries.iter().collect(),
        Some(names) => names
            .iter()
            .map(|n| catalog.get(n.trim()).ok_or_else(|| CliError::config("UnknownBattery", format!("no battery `{n}` in the catalog"))))
            .collect::<Result<_>>()?,
    };
    let degradation = rate_mode(&s.degradation_mode, "degradation-mode")?;
    let escalation = rate_mode(&s.escalation_mode, "escalation-mode")?;
    let source = revenue_source(s)?;
    let format = s.format();
    let mut summaries = Vec::new();
    for b in chosen {
        let g = base_revenue(b, &source, s)?;
        let mut scenario = b.scenario(g)?;
        scenario.degradation_mode = degradation;
        scenario.escalation_mode = escalation;
        let curve = annual_return_curve(&scenario);
        if format.csv() {
            let name = format!("econ_{}.csv", file_stem(&b.name));
            write_file(out, &name, &csv_bytes(|buf| write_curve_csv(buf, &curve))?)?;
        }
        let summary = EconSummary::new(&b.name, &scenario, &curve);
        emit!(
            "battery={} g={} breakeven={} final={}",
            summary.battery,
            summary.gross_revenue_base,
            summary.breakeven_year.map_or_else(|| "none".to_string(), |y| y.to_string()),
            summary.final_cumulative
        );
        summaries.push(summary);
    }
    if format.json() {
        write_json(out, "econ_summary.json", &summaries)?;
    }
    Ok(())
}
