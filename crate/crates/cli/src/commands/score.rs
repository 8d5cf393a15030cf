use std::collections::BTreeMap;
use std::path::Path;

use bessarb::evaluation::{pinball_windows, PinballReport};
use bessarb::market_data::MarketKind;

use super::{csv_bytes, input_path, market_kind, read_forecasts, read_prices, write_file, write_json};
use crate::args::Market;
use crate::config::Settings;
use crate::error::Result;

fn score_market(s: &Settings, kind: MarketKind, dual: bool) -> Result<PinballReport> {
    let (a, f) = match (dual, kind) {
        (false, _) => (
            input_path(&s.actuals, &s.data, "actuals.csv", "actuals")?,
            input_path(&s.forecasts, &s.data, "forecasts.csv", "forecasts")?,
        ),
        (true, MarketKind::Dam) => (
            input_path(&s.dam_actuals, &s.data, "dam_actuals.csv", "dam-actuals")?,
            input_path(&s.dam_forecasts, &s.data, "dam_forecasts.csv", "dam-forecasts")?,
        ),
        (true, MarketKind::Bm) => (
            input_path(&s.bm_actuals, &s.data, "bm_actuals.csv", "bm-actuals")?,
            input_path(&s.bm_forecasts, &s.data, "bm_forecasts.csv", "bm-forecasts")?,
        ),
    };
    let actuals = read_prices(&a, kind)?;
    let forecasts = read_forecasts(&f, kind)?;
    Ok(pinball_windows(&forecasts, &actuals)?)
}

pub fn run(s: &Settings, out: &Path) -> Result<()> {
    let market = s.market.unwrap_or(Market::Dam);
    let mut reports = BTreeMap::new();
    match market_kind(market) {
        Some(kind) => {
            reports.insert(kind.to_string(), score_market(s, kind, false)?);
        }
        None => {
            for kind in [MarketKind::Dam, MarketKind::Bm] {
                reports.insert(kind.to_string(), score_market(s, kind, true)?);
            }
        }
    }
    let format = s.format();
    if format.json() {
        write_json(out, "score.json", &reports)?;
    }
    if format.csv() {
        let bytes = csv_bytes(|buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["market", "level", "mean_loss"])?;
            for (m, r) in &reports {
                for l in &r.per_level {
                    w.write_record([m.clone(), l.level.to_string(), l.mean_loss.round_dp(6).to_string()])?;
                }
                w.write_record([m.clone(), "all".into(), r.aggregate.round_dp(6).to_string()])?;
            }
            w.flush()?;
            Ok(())
        })?;
        write_file(out, "score.csv", &bytes)?;
    }
    for (m, r) in &reports {
        emit!("market={m} pinball={} cells={}", r.aggregate.round_dp(4), r.cells);
    }
    Ok(())
}
