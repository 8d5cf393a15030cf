use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::{knn_predict, BaselineError, FeatureMatrix, FeatureRow, Result};
use crate::evaluation::pinball_loss;
use crate::market_data::{format_timestamp, MarketKind, QuantileForecast, TradingWindow};

const DAY: i64 = 86_400;

/// Walk-forward schedule, all spans in seconds. Each test block
/// `[t, t + test_span)` is forecast from rows whose targets were fully
/// realized by `t` and that opened within `train_span` of it. Every
/// `retune_every`, `k` is re-selected on the trailing `validation_span` of
/// that training range, fitted on the part before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkForwardPlan {
    pub train_span: i64,
    pub test_span: i64,
    pub step: i64,
    pub retune_every: i64,
    pub validation_span: i64,
    /// Defaults to the first instant with a full training span behind it.
    pub first_test_start: Option<i64>,
}

impl Default for WalkForwardPlan {
    fn default() -> Self {
        WalkForwardPlan {
            train_span: 60 * DAY,
            test_span: 7 * DAY,
            step: 7 * DAY,
            retune_every: 90 * DAY,
            validation_span: 14 * DAY,
            first_test_start: None,
        }
    }
}

impl WalkForwardPlan {
    fn validate(&self) -> Result<()> {
        let spans = [self.train_span, self.test_span, self.step, self.retune_every, self.validation_span];
        if spans.iter().any(|s| *s <= 0) {
            return Err(BaselineError::InvalidPlan("spans must be positive".into()));
        }
        if self.validation_span >= self.train_span {
            return Err(BaselineError::InvalidPlan("validation span must be shorter than the training span".into()));
        }
        if self.step < self.test_span {
            return Err(BaselineError::InvalidPlan("test blocks must not overlap (step < test span)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkForwardOutput {
    pub forecasts: Vec<QuantileForecast>,
    /// (tuning instant, selected k), one entry per re-selection.
    pub chosen_k: Vec<(i64, usize)>,
}

/// Rows opening in `[from, to)` whose targets end by `realized_by`.
fn usable(data: &FeatureMatrix, from: i64, to: i64, realized_by: i64, target_secs: i64) -> FeatureMatrix {
    let mut m = data.between(from, to);
    m.rows.retain(|r| r.timestamp + target_secs <= realized_by);
    m
}

fn validation_score(
    fit: &FeatureMatrix,
    val: &[FeatureRow],
    k: usize,
    levels: &[Decimal],
    market: MarketKind,
) -> Result<Decimal> {
    let mut total = Decimal::ZERO;
    for r in val {
        let window = TradingWindow::new(market, r.timestamp, fit.horizon)?;
        let f = knn_predict(fit, &r.features, k, levels, window)?;
        for (row, y) in f.rows.iter().zip(&r.targets) {
            for (q, yhat) in levels.iter().zip(row) {
                total += pinball_loss(*q, *y, *yhat);
            }
        }
    }
    Ok(total)
}

/// Forecasts every row from the first test block on. `k` comes from
/// `k_grid` by lowest validation pinball loss, the smaller `k` on ties.
pub fn walk_forward(
    data: &FeatureMatrix,
    market: MarketKind,
    plan: &WalkForwardPlan,
    k_grid: &[usize],
    levels: &[Decimal],
) -> Result<WalkForwardOutput> {
    plan.validate()?;
    let mut grid: Vec<usize> = k_grid.iter().copied().filter(|k| *k > 0).collect();
    grid.sort_unstable();
    grid.dedup();
    if grid.is_empty() {
        return Err(BaselineError::InvalidPlan("empty k grid".into()));
    }
    let (Some(first), Some(last)) = (data.rows.first(), data.rows.last()) else {
        return Err(BaselineError::InsufficientHistory("no feature rows".into()));
    };
    let target_secs = market.period_secs() * data.horizon as i64;
    let earliest = first.timestamp + plan.train_span;
    let t0 = plan.first_test_start.unwrap_or(earliest);
    if t0 < earliest {
        return Err(BaselineError::InsufficientHistory(format!(
            "test block at {} overlaps the training span, which needs data from {}",
            format_timestamp(t0),
            format_timestamp(t0 - plan.train_span)
        )));
    }
    if t0 > last.timestamp {
        return Err(BaselineError::InsufficientHistory(format!(
            "no rows at or after the first test block {}",
            format_timestamp(t0)
        )));
    }

    let mut out = WalkForwardOutput {
        forecasts: Vec::new(),
        chosen_k: Vec::new(),
    };
    let mut tuned: Option<(i64, usize)> = None;
    let mut t = t0;
    while t <= last.timestamp {
        let k = match tuned {
            Some((at, k)) if t - at < plan.retune_every => k,
            _ => {
                let val_start = t - plan.validation_span;
                let fit = usable(data, t - plan.train_span, val_start, val_start, target_secs);
                let val = usable(data, val_start, t, t, target_secs);
                let candidates: Vec<usize> = grid.iter().copied().filter(|k| *k <= fit.len()).collect();
                if candidates.is_empty() || val.is_empty() {
                    return Err(BaselineError::InsufficientHistory(format!(
                        "tuning at {} has {} fitting and {} validation rows",
                        format_timestamp(t),
                        fit.len(),
                        val.len()
                    )));
                }
                let mut best: Option<(Decimal, usize)> = None;
                for k in candidates {
                    let score = validation_score(&fit, &val.rows, k, levels, market)?;
                    if best.is_none_or(|(s, _)| score < s) {
                        best = Some((score, k));
                    }
                }
                let k = best.map(|(_, k)| k).unwrap_or(grid[0]);
                out.chosen_k.push((t, k));
                tuned = Some((t, k));
                k
            }
        };
        let train = usable(data, t - plan.train_span, t, t, target_secs);
        for r in data.rows.iter().filter(|r| r.timestamp >= t && r.timestamp < t + plan.test_span) {
            let window = TradingWindow::new(market, r.timestamp, data.horizon)?;
            out.forecasts.push(knn_predict(&train, &r.features, k.min(train.len()), levels, window)?);
        }
        t += plan.step;
    }
    Ok(out)
}
