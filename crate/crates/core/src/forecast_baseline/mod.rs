//! A K-nearest-neighbour quantile forecaster with walk-forward refitting,
//! so the engine can run end to end without an external model.
//!
//! Each row pairs a feature vector known before a trading window opens with
//! that window's realized prices. A forecast for a query takes, per
//! delivery period, empirical quantiles of the `k` nearest rows' targets.

mod knn;
mod walk;

use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Timelike, Utc};
use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;
use thiserror::Error;

use crate::market_data::{format_timestamp, parse_timestamp, MarketDataError, PriceSeries};

pub use knn::{empirical_quantile, knn_predict, Standardizer};
pub use walk::{walk_forward, WalkForwardOutput, WalkForwardPlan};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("k = {k} exceeds the {rows} training rows")]
    KTooLarge { k: usize, rows: usize },
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Market(#[from] MarketDataError),
}

pub type Result<T, E = BaselineError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    /// Start of the window the targets belong to.
    pub timestamp: i64,
    pub features: Vec<f64>,
    pub targets: Vec<Decimal>,
}

/// Rows in strictly increasing timestamp order, all of one feature and one
/// target dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub horizon: usize,
    pub rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    pub fn new(feature_names: Vec<String>, horizon: usize, rows: Vec<FeatureRow>) -> Result<Self> {
        if horizon == 0 {
            return Err(BaselineError::DimensionMismatch("horizon must be positive".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.features.len() != feature_names.len() || r.targets.len() != horizon {
                return Err(BaselineError::DimensionMismatch(format!(
                    "row {i} has {} features and {} targets, expected {} and {horizon}",
                    r.features.len(),
                    r.targets.len(),
                    feature_names.len()
                )));
            }
            if r.features.iter().any(|x| !x.is_finite()) {
                return Err(BaselineError::DimensionMismatch(format!("row {i} has a non-finite feature")));
            }
        }
        if rows.windows(2).any(|w| w[0].timestamp >= w[1].timestamp) {
            return Err(BaselineError::DimensionMismatch("row timestamps must strictly increase".into()));
        }
        Ok(FeatureMatrix {
            feature_names,
            horizon,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows with timestamps in `[from, to)`.
    pub fn between(&self, from: i64, to: i64) -> FeatureMatrix {
        FeatureMatrix {
            feature_names: self.feature_names.clone(),
            horizon: self.horizon,
            rows: self
                .rows
                .iter()
                .filter(|r| r.timestamp >= from && r.timestamp < to)
                .cloned()
                .collect(),
        }
    }
}

/// One row per window with at least `lags` earlier prices. Features:
/// `lag_1` (the latest price before the window) to `lag_{lags}`, then
/// `hour_of_day` and `day_of_week` (Monday = 0) of the window start, UTC.
/// Lags follow observed periods, so gaps between windows are skipped over.
pub fn build_features_from_prices(series: &[PriceSeries], lags: usize) -> Result<FeatureMatrix> {
    let Some(first) = series.first() else {
        return Err(BaselineError::EmptyTrainSet);
    };
    let horizon = first.len();
    let mut history: Vec<Decimal> = Vec::new();
    let mut rows = Vec::new();
    let mut prev_start = None;
    for s in series {
        if s.len() != horizon || s.window.market != first.window.market {
            return Err(BaselineError::DimensionMismatch(format!(
                "window at {} differs in market or length",
                format_timestamp(s.window.start)
            )));
        }
        let start = s.window.start;
        if prev_start.is_some_and(|p| start < p + s.window.period_secs() * horizon as i64) {
            return Err(BaselineError::DimensionMismatch(format!(
                "window at {} overlaps its predecessor",
                format_timestamp(start)
            )));
        }
        prev_start = Some(start);
        if history.len() >= lags {
            let mut features: Vec<f64> = history[history.len() - lags..]
                .iter()
                .rev()
                .map(|p| p.to_f64().unwrap_or(0.0))
                .collect();
            let t = DateTime::<Utc>::from_timestamp(start, 0).unwrap_or_default();
            features.push(t.hour() as f64);
            features.push(t.weekday().num_days_from_monday() as f64);
            rows.push(FeatureRow {
                timestamp: start,
                features,
                targets: s.prices.clone(),
            });
        }
        history.extend_from_slice(&s.prices);
    }
    let mut names: Vec<String> = (1..=lags).map(|i| format!("lag_{i}")).collect();
    names.push("hour_of_day".into());
    names.push("day_of_week".into());
    FeatureMatrix::new(names, horizon, rows)
}

/// Header `timestamp,<features...>,target_0,...,target_{H-1}`; the horizon
/// is the number of trailing `target_i` columns.
pub fn parse_feature_csv(path: &Path) -> Result<FeatureMatrix> {
    let file = File::open(path).map_err(|e| BaselineError::Io(format!("{}: {e}", path.display())))?;
    parse_feature_reader(file)
}

pub fn parse_feature_reader<R: Read>(reader: R) -> Result<FeatureMatrix> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| BaselineError::MalformedRow { line: 1, reason: e.to_string() })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.first().map(String::as_str) != Some("timestamp") {
        return Err(BaselineError::MalformedRow {
            line: 1,
            reason: "first column must be `timestamp`".into(),
        });
    }
    let first_target = header
        .iter()
        .position(|h| h.starts_with("target_"))
        .ok_or_else(|| BaselineError::MalformedRow {
            line: 1,
            reason: "no target_ columns".into(),
        })?;
    for (i, h) in header[first_target..].iter().enumerate() {
        if *h != format!("target_{i}") {
            return Err(BaselineError::MalformedRow {
                line: 1,
                reason: format!("expected target_{i}, found `{h}`"),
            });
        }
    }
    let feature_names = header[1..first_target].to_vec();
    let horizon = header.len() - first_target;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let bad = |reason: String| BaselineError::MalformedRow { line, reason };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != header.len() {
            return Err(bad(format!("{} fields, expected {}", rec.len(), header.len())));
        }
        let timestamp = parse_timestamp(&rec[0]).map_err(bad)?;
        let features = (1..first_target)
            .map(|j| rec[j].trim().parse::<f64>().map_err(|_| bad(format!("not a number: `{}`", &rec[j]))))
            .collect::<Result<Vec<_>>>()?;
        let targets = (first_target..header.len())
            .map(|j| Decimal::from_str(rec[j].trim()).map_err(|_| bad(format!("not a number: `{}`", &rec[j]))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureRow {
            timestamp,
            features,
            targets,
        });
    }
    FeatureMatrix::new(feature_names, horizon, rows)
}
