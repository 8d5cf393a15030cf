//! Market time structure, price and quantile-forecast series, CSV ingestion
//! and synthetic instance generation.

mod csv_io;
mod synthetic;

use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{
    format_timestamp, parse_forecast_csv, parse_forecast_reader, parse_price_csv, parse_price_reader,
    parse_timestamp, write_forecast_csv, write_price_csv, IngestWarning, ParsedForecasts, ParsedPrices,
};
pub use synthetic::{generate_synthetic, generate_synthetic_dual, SyntheticDual, DEFAULT_LEVELS, SYNTHETIC_EPOCH};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarketDataError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: timestamps must be strictly increasing")]
    NonMonotonicTimestamps { line: usize },
    #[error("line {line}: missing period inside window starting {window_start}, expected timestamp {expected}")]
    MissingPeriod {
        line: usize,
        window_start: String,
        expected: String,
    },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("quantile level out of range (0, 1) in column `{0}`")]
    LevelOutOfRange(String),
    #[error("duplicate quantile column `{0}`")]
    DuplicateLevel(String),
    #[error("window mismatch: {0}")]
    WindowMismatch(String),
    #[error("invalid data: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MarketDataError {
    fn from(e: std::io::Error) -> Self {
        MarketDataError::Io(e.to_string())
    }
}

pub type Result<T, E = MarketDataError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarketKind {
    Dam,
    Bm,
}

impl MarketKind {
    /// Settlement period length in seconds.
    pub const fn period_secs(self) -> i64 {
        match self {
            MarketKind::Dam => 3600,
            MarketKind::Bm => 1800,
        }
    }

    pub const fn default_period_count(self) -> usize {
        match self {
            MarketKind::Dam => 24,
            MarketKind::Bm => 16,
        }
    }
}

impl fmt::Display for MarketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarketKind::Dam => "DAM",
            MarketKind::Bm => "BM",
        })
    }
}

impl FromStr for MarketKind {
    type Err = MarketDataError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dam" => Ok(MarketKind::Dam),
            "bm" => Ok(MarketKind::Bm),
            other => Err(MarketDataError::Invalid(format!("unknown market `{other}`"))),
        }
    }
}

/// A contiguous run of settlement periods. `start` is UTC epoch seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TradingWindow {
    pub market: MarketKind,
    pub start: i64,
    pub period_count: usize,
}

impl TradingWindow {
    pub fn new(market: MarketKind, start: i64, period_count: usize) -> Result<Self> {
        if period_count == 0 {
            return Err(MarketDataError::Invalid("period_count must be positive".into()));
        }
        Ok(TradingWindow {
            market,
            start,
            period_count,
        })
    }

    /// Window with the market's default horizon (24 DAM hours, 16 BM half-hours).
    pub fn standard(market: MarketKind, start: i64) -> Self {
        TradingWindow {
            market,
            start,
            period_count: market.default_period_count(),
        }
    }

    pub fn period_secs(&self) -> i64 {
        self.market.period_secs()
    }

    pub fn timestamp(&self, period: usize) -> i64 {
        self.start + period as i64 * self.period_secs()
    }

    /// Exclusive end instant.
    pub fn end(&self) -> i64 {
        self.timestamp(self.period_count)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriceSeries {
    pub window: TradingWindow,
    pub prices: Vec<Decimal>,
}

impl PriceSeries {
    pub fn new(window: TradingWindow, prices: Vec<Decimal>) -> Result<Self> {
        if prices.len() != window.period_count {
            return Err(MarketDataError::WindowMismatch(format!(
                "{} prices for a {}-period window",
                prices.len(),
                window.period_count
            )));
        }
        Ok(PriceSeries { window, prices })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

/// Predicted price per delivery period at each quantile level.
/// `rows[period][level_index]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantileForecast {
    pub window: TradingWindow,
    pub levels: Vec<Decimal>,
    pub rows: Vec<Vec<Decimal>>,
}

impl QuantileForecast {
    /// Structural validation only; crossing quantiles are accepted here and
    /// fixed by [`validate_and_repair`].
    pub fn new(window: TradingWindow, levels: Vec<Decimal>, rows: Vec<Vec<Decimal>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(MarketDataError::Invalid("forecast needs at least one level".into()));
        }
        for l in &levels {
            if *l <= Decimal::ZERO || *l >= Decimal::ONE {
                return Err(MarketDataError::LevelOutOfRange(l.to_string()));
            }
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MarketDataError::Invalid("levels must be strictly increasing".into()));
        }
        if rows.len() != window.period_count {
            return Err(MarketDataError::WindowMismatch(format!(
                "{} forecast rows for a {}-period window",
                rows.len(),
                window.period_count
            )));
        }
        if rows.iter().any(|r| r.len() != levels.len()) {
            return Err(MarketDataError::Invalid("every row needs one value per level".into()));
        }
        Ok(QuantileForecast { window, levels, rows })
    }

    /// Forecast whose every level equals the given prices.
    pub fn degenerate(actuals: &PriceSeries, levels: &[Decimal]) -> Result<Self> {
        let rows = actuals.prices.iter().map(|p| vec![*p; levels.len()]).collect();
        QuantileForecast::new(actuals.window, levels.to_vec(), rows)
    }

    pub fn level_index(&self, level: Decimal) -> Option<usize> {
        self.levels.iter().position(|l| *l == level)
    }

    /// Price curve across the window at one level.
    pub fn curve(&self, level: Decimal) -> Option<Vec<Decimal>> {
        let j = self.level_index(level)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn is_monotone(&self) -> bool {
        self.rows.iter().all(|r| r.windows(2).all(|w| w[0] <= w[1]))
    }
}

/// Sorts each period's values ascending across levels. Returns the repaired
/// forecast and the number of periods that needed it. Idempotent.
pub fn validate_and_repair(mut forecast: QuantileForecast) -> (QuantileForecast, usize) {
    let mut repairs = 0;
    for row in &mut forecast.rows {
        if row.windows(2).any(|w| w[0] > w[1]) {
            row.sort();
            repairs += 1;
        }
    }
    (forecast, repairs)
}

pub const DUAL_BM_SLOTS: usize = 16;

/// A 24-hour DAM forecast paired with the 16 half-hour BM forecast that
/// opens at the same instant. BM slot `s` covers minutes `[30s, 30s + 30)`
/// of DAM hour `s / 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualHorizon {
    pub dam: QuantileForecast,
    pub bm: QuantileForecast,
}

impl DualHorizon {
    pub fn dam_window(&self) -> TradingWindow {
        self.dam.window
    }

    pub fn bm_window(&self) -> TradingWindow {
        self.bm.window
    }

    pub fn dam_hour_of_slot(slot: usize) -> usize {
        slot / 2
    }

    /// First BM slot inside DAM hour `hour` (may lie past the BM window).
    pub fn first_slot_of_hour(hour: usize) -> usize {
        hour * 2
    }
}

pub(crate) fn check_dual_windows(dam: &TradingWindow, bm: &TradingWindow) -> Result<()> {
    if dam.market != MarketKind::Dam || dam.period_count != MarketKind::Dam.default_period_count() {
        return Err(MarketDataError::WindowMismatch(format!(
            "DAM side must be 24 hourly periods, got {} {} periods",
            dam.market, dam.period_count
        )));
    }
    if bm.market != MarketKind::Bm || bm.period_count != DUAL_BM_SLOTS {
        return Err(MarketDataError::WindowMismatch(format!(
            "BM side must be 16 half-hourly periods, got {} {} periods",
            bm.market, bm.period_count
        )));
    }
    if dam.start != bm.start {
        return Err(MarketDataError::WindowMismatch(format!(
            "DAM window starts {} but BM window starts {}",
            format_timestamp(dam.start),
            format_timestamp(bm.start)
        )));
    }
    Ok(())
}

pub fn build_dual_horizon(dam: QuantileForecast, bm: QuantileForecast) -> Result<DualHorizon> {
    check_dual_windows(&dam.window, &bm.window)?;
    Ok(DualHorizon { dam, bm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal_macros::dec;

    fn window(market: MarketKind, n: usize) -> TradingWindow {
        TradingWindow::new(market, 0, n).unwrap()
    }

    fn flat_forecast(market: MarketKind, n: usize, start: i64) -> QuantileForecast {
        let w = TradingWindow::new(market, start, n).unwrap();
        QuantileForecast::new(w, vec![dec!(0.5)], vec![vec![dec!(1)]; n]).unwrap()
    }

    #[test]
    fn window_timestamps() {
        let w = TradingWindow::standard(MarketKind::Bm, 1000);
        assert_eq!(w.period_count, 16);
        assert_eq!(w.timestamp(3), 1000 + 3 * 1800);
        assert_eq!(TradingWindow::standard(MarketKind::Dam, 0).end(), 86400);
    }

    #[test]
    fn repair_sorts_crossed_periods() {
        let f = QuantileForecast::new(
            window(MarketKind::Dam, 2),
            vec![dec!(0.1), dec!(0.5), dec!(0.9)],
            vec![vec![dec!(30), dec!(20), dec!(40)], vec![dec!(1), dec!(2), dec!(3)]],
        )
        .unwrap();
        let (fixed, repairs) = validate_and_repair(f);
        assert_eq!(repairs, 1);
        assert_eq!(fixed.rows[0], vec![dec!(20), dec!(30), dec!(40)]);
        let (again, repairs) = validate_and_repair(fixed.clone());
        assert_eq!((again, repairs), (fixed, 0));
    }

    #[test]
    fn repair_leaves_constant_forecast() {
        let f = QuantileForecast::new(
            window(MarketKind::Dam, 3),
            vec![dec!(0.1), dec!(0.9)],
            vec![vec![dec!(50); 2]; 3],
        )
        .unwrap();
        let (fixed, repairs) = validate_and_repair(f.clone());
        assert_eq!(repairs, 0);
        assert_eq!(fixed, f);
    }

    #[test]
    fn forecast_structure_checks() {
        let w = window(MarketKind::Dam, 1);
        assert!(QuantileForecast::new(w, vec![dec!(0.5), dec!(0.1)], vec![vec![dec!(1); 2]]).is_err());
        assert!(matches!(
            QuantileForecast::new(w, vec![dec!(1.0)], vec![vec![dec!(1)]]),
            Err(MarketDataError::LevelOutOfRange(_))
        ));
        assert!(QuantileForecast::new(w, vec![dec!(0.5)], vec![]).is_err());
    }

    #[test]
    fn dual_horizon_mapping() {
        let h = build_dual_horizon(flat_forecast(MarketKind::Dam, 24, 0), flat_forecast(MarketKind::Bm, 16, 0)).unwrap();
        assert_eq!(h.bm_window().start, h.dam_window().start);
        assert_eq!(DualHorizon::dam_hour_of_slot(0), 0);
        assert_eq!(DualHorizon::dam_hour_of_slot(1), 0);
        assert_eq!(DualHorizon::dam_hour_of_slot(15), 7);
        let hours: std::collections::BTreeSet<_> = (0..16).map(DualHorizon::dam_hour_of_slot).collect();
        assert_eq!(hours, (0..8).collect());
    }

    #[test]
    fn dual_horizon_rejects_misaligned() {
        let late = build_dual_horizon(flat_forecast(MarketKind::Dam, 24, 0), flat_forecast(MarketKind::Bm, 16, 3600));
        assert!(matches!(late, Err(MarketDataError::WindowMismatch(_))));
        let short = build_dual_horizon(flat_forecast(MarketKind::Dam, 23, 0), flat_forecast(MarketKind::Bm, 16, 0));
        assert!(matches!(short, Err(MarketDataError::WindowMismatch(_))));
    }
}
