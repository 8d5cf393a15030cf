use std::path::Path;

use bessarb::forecast_baseline::{build_features_from_prices, walk_forward, WalkForwardPlan};
use bessarb::market_data::{
    generate_synthetic, generate_synthetic_dual, write_forecast_csv, write_price_csv, MarketKind, PriceSeries,
    QuantileForecast, DEFAULT_LEVELS,
};

use super::{market_kind, sha256_hex, write_file};
use crate::args::{Forecaster, Market};
use crate::config::Settings;
use crate::error::{CliError, Result};

const DEFAULT_K_GRID: [usize; 6] = [3, 5, 7, 10, 15, 20];

/// Replaces synthetic forecasts by walk-forward KNN ones. Windows inside
/// the first training span have no forecast and are dropped.
fn knn(s: &Settings, kind: MarketKind, actuals: Vec<PriceSeries>) -> Result<(Vec<PriceSeries>, Vec<QuantileForecast>)> {
    let lags = kind.default_period_count();
    let features = build_features_from_prices(&actuals, lags)?;
    let plan = WalkForwardPlan {
        train_span: s.train_days.unwrap_or(60) * 86_400,
        ..WalkForwardPlan::default()
    };
    let grid = s.k_grid.clone().unwrap_or_else(|| DEFAULT_K_GRID.to_vec());
    let out = walk_forward(&features, kind, &plan, &grid, &DEFAULT_LEVELS)?;
    for (at, k) in &out.chosen_k {
        emit!("knn market={kind} tuned_at={} k={k}", bessarb::market_data::format_timestamp(*at));
    }
    let first = out.forecasts.first().map_or(i64::MAX, |f| f.window.start);
    let kept = actuals.into_iter().filter(|a| a.window.start >= first).collect();
    Ok((kept, out.forecasts))
}

fn bytes_of(actuals: &[PriceSeries], forecasts: &[QuantileForecast]) -> Result<(Vec<u8>, Vec<u8>)> {
    let mut a = Vec::new();
    write_price_csv(&mut a, actuals)?;
    let mut f = Vec::new();
    write_forecast_csv(&mut f, forecasts)?;
    Ok((a, f))
}

pub fn run(s: &Settings, out: &Path) -> Result<()> {
    let market = s.market.unwrap_or(Market::Dam);
    let days = s.days.unwrap_or(30);
    let noise = s.noise_sd.unwrap_or(5.0);
    let seed = s.seed.unwrap_or(1);
    if days == 0 {
        return Err(CliError::config("InvalidDays", "--days must be positive"));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(CliError::config("InvalidNoise", "--noise-sd must be a non-negative number"));
    }
    let use_knn = s.forecaster == Some(Forecaster::Knn);
    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
    match market_kind(market) {
        Some(kind) => {
            let (mut actuals, mut forecasts) = generate_synthetic(seed, kind, days, noise);
            if use_knn {
                (actuals, forecasts) = knn(s, kind, actuals)?;
            }
            let (a, f) = bytes_of(&actuals, &forecasts)?;
            files.push(("actuals.csv", a));
            files.push(("forecasts.csv", f));
        }
        None => {
            let mut d = generate_synthetic_dual(seed, days, noise);
            if use_knn {
                (d.dam_actuals, d.dam_forecasts) = knn(s, MarketKind::Dam, d.dam_actuals)?;
                (d.bm_actuals, d.bm_forecasts) = knn(s, MarketKind::Bm, d.bm_actuals)?;
            }
            let (a, f) = bytes_of(&d.dam_actuals, &d.dam_forecasts)?;
            files.push(("dam_actuals.csv", a));
            files.push(("dam_forecasts.csv", f));
            let (a, f) = bytes_of(&d.bm_actuals, &d.bm_forecasts)?;
            files.push(("bm_actuals.csv", a));
            files.push(("bm_forecasts.csv", f));
        }
    }
    for (name, bytes) in files {
        let path = write_file(out, name, &bytes)?;
        emit!("{} sha256={}", path.display(), sha256_hex(&bytes));
    }
    Ok(())
}
