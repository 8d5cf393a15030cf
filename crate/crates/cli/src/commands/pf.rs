use std::path::Path;

use bessarb::evaluation::{
    cents, dp_optimal, dp_optimal_dual, perfect_foresight, perfect_foresight_dual, EvaluationError,
};
use bessarb::market_data::format_timestamp;
use bessarb::strategies::Strategy;
use rust_decimal::Decimal;
use serde::Serialize;

use super::{csv_bytes, label, load_actuals, load_spec, opt_money, parse_strategies, write_file, write_json};
use crate::args::Market;
use crate::config::Settings;
use crate::error::{CliError, Result};

#[derive(Debug, Serialize)]
struct PfRow {
    market: String,
    window_start: String,
    strategy: Strategy,
    pf_profit: Decimal,
    dp_profit: Option<Decimal>,
    /// Unrounded (pf, dp), so totals match the sweep reports.
    #[serde(skip)]
    exact: (Decimal, Option<Decimal>),
}

impl PfRow {
    fn new(market: String, window_start: i64, strategy: Strategy, pf: Decimal, dp: Option<Decimal>) -> Self {
        PfRow {
            market,
            window_start: format_timestamp(window_start),
            strategy,
            pf_profit: cents(pf),
            dp_profit: dp.map(cents),
            exact: (pf, dp),
        }
    }
}

/// Off-grid batteries have no optimum to compare with.
fn optional(dp: std::result::Result<Decimal, EvaluationError>) -> Result<Option<Decimal>> {
    match dp {
        Ok(v) => Ok(Some(v)),
        Err(EvaluationError::NonCommensurateRamp { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn run(s: &Settings, out: &Path) -> Result<()> {
    let spec = load_spec(&s.battery)?;
    let strategies = parse_strategies(&s.strategies)?;
    let actuals = load_actuals(s)?;
    let mut rows = Vec::new();
    if actuals.market != Market::Dual {
        for a in &actuals.first {
            for st in &strategies {
                rows.push(PfRow::new(
                    a.window.market.to_string(),
                    a.window.start,
                    *st,
                    perfect_foresight(a, *st, &spec)?,
                    optional(dp_optimal(a, &st.effective_spec(&spec)))?,
                ));
            }
        }
    } else {
        for dam in &actuals.first {
            let Some(bm) = actuals.bm.iter().find(|b| b.window.start == dam.window.start) else {
                return Err(CliError::data(
                    "WindowMismatch",
                    format!("no BM window opens with the DAM day at {}", format_timestamp(dam.window.start)),
                ));
            };
            rows.push(PfRow::new(
                "DUAL".into(),
                dam.window.start,
                Strategy::Ts3,
                perfect_foresight_dual(dam, bm, &spec)?,
                optional(dp_optimal_dual(dam, bm, &spec))?,
            ));
        }
    }
    let format = s.format();
    if format.json() {
        write_json(out, "pf.json", &rows)?;
    }
    if format.csv() {
        let bytes = csv_bytes(|buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["market", "window_start", "strategy", "pf_profit", "dp_profit"])?;
            for r in &rows {
                w.write_record([
                    r.market.clone(),
                    r.window_start.clone(),
                    r.strategy.to_string(),
                    r.pf_profit.to_string(),
                    r.dp_profit.map(|d| d.to_string()).unwrap_or_default(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
        write_file(out, "pf.csv", &bytes)?;
    }
    let shown: Vec<Strategy> = if actuals.market != Market::Dual { strategies } else { vec![Strategy::Ts3] };
    for st in shown {
        let mine: Vec<&PfRow> = rows.iter().filter(|r| r.strategy == st).collect();
        let pf = cents(mine.iter().map(|r| r.exact.0).sum());
        let dp = mine.iter().try_fold(Decimal::ZERO, |acc, r| r.exact.1.map(|d| acc + d)).map(cents);
        emit!("market={} strategy={st} pf={pf} dp={}", label(actuals.market), opt_money(dp));
    }
    Ok(())
}
