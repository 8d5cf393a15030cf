use std::path::Path;
use std::str::FromStr;

use bessarb::battery::BatterySpec;
use bessarb::evaluation::{run_sweep, BacktestReport, Dataset, SweepOptions};
use bessarb::strategies::{ts3_dual_with, write_schedule_csv, PairRule, QuantilePair, Schedule, Strategy};

use super::{csv_bytes, load_dataset, load_spec, opt_money, pair_rule, parse_pair, write_file, write_json};
use crate::args::Market;
use crate::config::Settings;
use crate::error::{CliError, Result};

fn per_window_csv(report: &BacktestReport) -> Result<Vec<u8>> {
    csv_bytes(|buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["window_start", "realized_profit", "pf_profit", "dp_profit", "trade_count"])?;
        for r in &report.per_window {
            w.write_record([
                r.window_start.clone(),
                r.realized_profit.to_string(),
                r.pf_profit.to_string(),
                r.dp_profit.map(|d| d.to_string()).unwrap_or_default(),
                r.trade_count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

/// The planned schedules per market, chained like the backtest itself.
fn schedules(
    dataset: &Dataset,
    strategy: Strategy,
    pair: QuantilePair,
    spec: &BatterySpec,
    rule: PairRule,
    carry: bool,
) -> Result<Vec<(&'static str, Vec<Schedule>)>> {
    let mut state = spec.initial_state();
    let window_spec = |charge| if carry { spec.clone().with_initial_charge(charge) } else { Ok(spec.clone()) };
    match dataset {
        Dataset::Single { forecasts, .. } => {
            let mut out = Vec::with_capacity(forecasts.len());
            for f in forecasts {
                let sp = window_spec(state.charge)?;
                let s = strategy.run(f, pair, &sp, rule)?;
                state = s.replay(&strategy.effective_spec(&sp)).map_err(|e| CliError::data("ScheduleViolation", e.to_string()))?;
                out.push(s);
            }
            Ok(vec![("schedules.csv", out)])
        }
        Dataset::Dual { horizons, .. } => {
            let (mut dam, mut bm) = (Vec::new(), Vec::new());
            for h in horizons {
                let sp = window_spec(state.charge)?;
                let s = ts3_dual_with(h, pair, &sp, rule)?;
                state = s.replay(&sp).map_err(|e| CliError::data("ScheduleViolation", e.to_string()))?;
                dam.push(s.dam);
                bm.push(s.bm);
            }
            Ok(vec![("schedules_dam.csv", dam), ("schedules_bm.csv", bm)])
        }
    }
}

pub fn run(s: &Settings, out: &Path) -> Result<()> {
    let spec = load_spec(&s.battery)?;
    let strategy = Strategy::from_str(s.strategy.as_deref().unwrap_or("ts3"))?;
    let pair = parse_pair(&s.pair)?;
    let rule = pair_rule(s)?;
    let carry = s.carry_state.unwrap_or(false);
    if s.market == Some(Market::Dual) && strategy != Strategy::Ts3 {
        return Err(CliError::config("UnsupportedStrategy", "the dual market trades TS3 only"));
    }
    let dataset = load_dataset(s)?;
    let opts = SweepOptions {
        rule,
        carry_state: carry,
        jobs: s.jobs.unwrap_or(0),
        ..SweepOptions::new(vec![strategy], vec![pair], spec.clone())
    };
    let report = run_sweep(std::slice::from_ref(&dataset), &opts)?;
    let cell = &report.cells[0];
    let format = s.format();
    if format.json() {
        write_json(out, "backtest.json", cell)?;
    }
    if format.csv() {
        write_file(out, "backtest.csv", &per_window_csv(cell)?)?;
    }
    if s.schedules.unwrap_or(false) {
        for (name, list) in schedules(&dataset, strategy, pair, &spec, rule, carry)? {
            write_file(out, name, &csv_bytes(|buf| write_schedule_csv(buf, &list))?)?;
        }
    }
    emit!(
        "profit={} trades={} pf={} dp={}",
        cell.realized_profit,
        cell.trade_count,
        cell.pf_profit,
        opt_money(cell.dp_profit)
    );
    Ok(())
}
