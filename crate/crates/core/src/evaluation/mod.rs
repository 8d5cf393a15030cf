//! Settlement against actual prices, benchmarks and forecast scoring.

mod dp;
mod report;
mod sweep;

use rust_decimal::{Decimal, RoundingStrategy};
use serde::Serialize;
use thiserror::Error;

use crate::battery::{BatterySpec, Energy};
use crate::market_data::{DualHorizon, MarketDataError, PriceSeries, QuantileForecast};
use crate::strategies::{
    dam_event, order_cash, ts3_dual, DualSchedule, PairRule, QuantilePair, Schedule, ScheduleViolation, Strategy,
    StrategyError, DUAL_EVENTS,
};

pub use dp::{dp_optimal, dp_optimal_dual};
pub use report::{write_long_csv, write_plot_csv, write_table_csv, ReportMarket};
pub use sweep::{run_sweep, BacktestReport, Dataset, SweepOptions, SweepReport, WindowResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvaluationError {
    #[error("window mismatch: {0}")]
    WindowMismatch(String),
    #[error("swing {swing} MWh and initial offset {offset} MWh are not whole multiples of the {tick} MWh step")]
    NonCommensurateRamp { swing: Energy, offset: Energy, tick: Energy },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Market(#[from] MarketDataError),
    #[error("schedule does not replay: {0}")]
    Replay(#[from] ScheduleViolation),
}

pub type Result<T, E = EvaluationError> = std::result::Result<T, E>;

/// Rounds a money amount to cents, halves away from zero, always carrying
/// two decimal places.
pub fn cents(x: Decimal) -> Decimal {
    let mut r = x.round_dp_with_strategy(2, RoundingStrategy::MidpointAwayFromZero);
    r.rescale(2);
    r
}

fn check_window(schedule: &Schedule, actuals: &PriceSeries) -> Result<()> {
    if schedule.window != actuals.window {
        return Err(EvaluationError::WindowMismatch(format!(
            "schedule window {:?} against actuals window {:?}",
            schedule.window, actuals.window
        )));
    }
    Ok(())
}

/// Realized cash of a schedule at actual prices, summed in period order.
pub fn settle(schedule: &Schedule, actuals: &PriceSeries, spec: &BatterySpec) -> Result<Decimal> {
    check_window(schedule, actuals)?;
    Ok(schedule.orders.iter().fold(Decimal::ZERO, |acc, o| {
        acc + order_cash(o.side, actuals.prices[o.period], o.volume, spec)
    }))
}

/// Realized cash of a dual schedule, summed in merged event order.
pub fn settle_dual(
    schedule: &DualSchedule,
    dam_actuals: &PriceSeries,
    bm_actuals: &PriceSeries,
    spec: &BatterySpec,
) -> Result<Decimal> {
    check_window(&schedule.dam, dam_actuals)?;
    check_window(&schedule.bm, bm_actuals)?;
    Ok(schedule.merged().iter().fold(Decimal::ZERO, |acc, (market, o)| {
        let prices = match market {
            crate::market_data::MarketKind::Dam => &dam_actuals.prices,
            crate::market_data::MarketKind::Bm => &bm_actuals.prices,
        };
        acc + order_cash(o.side, prices[o.period], o.volume, spec)
    }))
}

fn degenerate(actuals: &PriceSeries) -> Result<QuantileForecast> {
    Ok(QuantileForecast::degenerate(actuals, &[Decimal::new(5, 1)])?)
}

/// Profit of `strategy` when its forecast equals the actual prices.
pub fn perfect_foresight(actuals: &PriceSeries, strategy: Strategy, spec: &BatterySpec) -> Result<Decimal> {
    let schedule = strategy.run(&degenerate(actuals)?, QuantilePair::median(), spec, PairRule::Conservative)?;
    settle(&schedule, actuals, spec)
}

/// TS3-Dual profit when both forecasts equal the actual prices.
pub fn perfect_foresight_dual(dam_actuals: &PriceSeries, bm_actuals: &PriceSeries, spec: &BatterySpec) -> Result<Decimal> {
    let horizon = crate::market_data::build_dual_horizon(degenerate(dam_actuals)?, degenerate(bm_actuals)?)?;
    let schedule = ts3_dual(&horizon, QuantilePair::median(), spec)?;
    settle_dual(&schedule, dam_actuals, bm_actuals, spec)
}

/// Actual prices of both markets laid out on the merged event line.
pub(crate) fn merged_prices(dam: &PriceSeries, bm: &PriceSeries) -> Vec<Decimal> {
    let mut out = vec![Decimal::ZERO; DUAL_EVENTS];
    for (h, p) in dam.prices.iter().enumerate() {
        out[dam_event(h)] = *p;
    }
    for (s, p) in bm.prices.iter().enumerate() {
        out[crate::strategies::bm_event(s)] = *p;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LevelScore {
    pub level: Decimal,
    pub mean_loss: Decimal,
}

/// Mean pinball loss per level and over every (period, level) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PinballReport {
    pub per_level: Vec<LevelScore>,
    pub aggregate: Decimal,
    pub cells: usize,
}

/// `q (y - f)` when the actual `y` is at or above the forecast `f`,
/// otherwise `(1 - q)(f - y)`.
pub fn pinball_loss(level: Decimal, actual: Decimal, forecast: Decimal) -> Decimal {
    if actual >= forecast {
        level * (actual - forecast)
    } else {
        (Decimal::ONE - level) * (forecast - actual)
    }
}

pub fn pinball(forecast: &QuantileForecast, actuals: &PriceSeries) -> Result<PinballReport> {
    pinball_windows(std::slice::from_ref(forecast), std::slice::from_ref(actuals))
}

/// Pinball scores pooled over many windows. Every forecast must carry the
/// same levels as the first.
pub fn pinball_windows(forecasts: &[QuantileForecast], actuals: &[PriceSeries]) -> Result<PinballReport> {
    if forecasts.len() != actuals.len() || forecasts.is_empty() {
        return Err(EvaluationError::WindowMismatch(format!(
            "{} forecasts against {} actual windows",
            forecasts.len(),
            actuals.len()
        )));
    }
    let levels = &forecasts[0].levels;
    let mut sums = vec![Decimal::ZERO; levels.len()];
    let mut periods = 0usize;
    for (f, a) in forecasts.iter().zip(actuals) {
        if f.window != a.window || f.levels != *levels {
            return Err(EvaluationError::WindowMismatch(format!(
                "forecast for window starting {} does not match its actuals or level set",
                f.window.start
            )));
        }
        for (row, y) in f.rows.iter().zip(&a.prices) {
            for ((sum, q), yhat) in sums.iter_mut().zip(levels).zip(row) {
                *sum += pinball_loss(*q, *y, *yhat);
            }
        }
        periods += a.len();
    }
    let n = Decimal::from(periods);
    let total: Decimal = sums.iter().sum();
    Ok(PinballReport {
        per_level: levels
            .iter()
            .zip(&sums)
            .map(|(l, s)| LevelScore {
                level: *l,
                mean_loss: *s / n,
            })
            .collect(),
        aggregate: total / (n * Decimal::from(levels.len())),
        cells: periods * levels.len(),
    })
}

/// Convenience for a dual horizon built from degenerate forecasts.
pub fn degenerate_dual(dam: &PriceSeries, bm: &PriceSeries) -> Result<DualHorizon> {
    Ok(crate::market_data::build_dual_horizon(degenerate(dam)?, degenerate(bm)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{MarketKind, TradingWindow};
    use crate::strategies::{Side, TradeOrder};
    use rust_decimal_macros::dec;

    fn series(prices: &[i64]) -> PriceSeries {
        let w = TradingWindow::new(MarketKind::Dam, 0, prices.len()).unwrap();
        PriceSeries::new(w, prices.iter().map(|p| Decimal::from(*p)).collect()).unwrap()
    }

    fn two_orders(window: crate::market_data::TradingWindow, buy: usize, sell: usize) -> Schedule {
        let one = Energy::from_milli(1000);
        let mut orders = vec![
            TradeOrder { period: buy, side: Side::Buy, volume: one, expected_price: Decimal::ZERO },
            TradeOrder { period: sell, side: Side::Sell, volume: one, expected_price: Decimal::ZERO },
        ];
        orders.sort_by_key(|o| o.period);
        Schedule { window, orders, strategy: Strategy::Ts3 }
    }

    #[test]
    fn settle_examples() {
        let spec = BatterySpec::reference();
        let a = series(&[10, 50]);
        assert_eq!(settle(&two_orders(a.window, 0, 1), &a, &spec).unwrap().round_dp(5), dec!(29.79592));
        assert_eq!(settle(&Schedule::empty(a.window, Strategy::Ts1), &a, &spec).unwrap(), Decimal::ZERO);
        let bad = series(&[50, 10]);
        assert_eq!(
            settle(&two_orders(bad.window, 0, 1), &bad, &spec).unwrap().round_dp(4),
            dec!(-43.0204)
        );
        let other = series(&[1, 2, 3]);
        assert!(matches!(
            settle(&two_orders(a.window, 0, 1), &other, &spec),
            Err(EvaluationError::WindowMismatch(_))
        ));
    }

    #[test]
    fn perfect_foresight_examples() {
        let spec = BatterySpec::reference();
        assert_eq!(
            perfect_foresight(&series(&[10, 50]), Strategy::Ts3, &spec).unwrap().round_dp(5),
            dec!(29.79592)
        );
        let rising = series(&[10, 20, 30, 40, 50]);
        let f = degenerate(&rising).unwrap();
        let s = Strategy::Ts1.run(&f, QuantilePair::median(), &spec, PairRule::Conservative).unwrap();
        assert_eq!((s.orders[0].period, s.orders[1].period), (0, 4));
    }

    #[test]
    fn pinball_examples() {
        assert_eq!(pinball_loss(dec!(0.9), dec!(100), dec!(80)), dec!(18.0));
        assert_eq!(pinball_loss(dec!(0.9), dec!(80), dec!(100)), dec!(2.0));
        assert_eq!(pinball_loss(dec!(0.5), dec!(3), dec!(10)), dec!(3.5));
        let a = series(&[10, 20, 30]);
        let perfect = QuantileForecast::degenerate(&a, &[dec!(0.1), dec!(0.9)]).unwrap();
        let r = pinball(&perfect, &a).unwrap();
        assert_eq!(r.aggregate, Decimal::ZERO);
        assert!(r.per_level.iter().all(|l| l.mean_loss.is_zero()));
    }

    #[test]
    fn pinball_aggregate_is_cell_mean() {
        let a = series(&[10, 20]);
        let f = QuantileForecast::new(a.window, vec![dec!(0.1), dec!(0.9)], vec![vec![dec!(0), dec!(20)], vec![dec!(15), dec!(25)]])
            .unwrap();
        let r = pinball(&f, &a).unwrap();
        // cells: 0.1*10, 0.1*10, 0.1*5, 0.1*5
        assert_eq!(r.per_level[0].mean_loss, dec!(0.75));
        assert_eq!(r.per_level[1].mean_loss, dec!(0.75));
        assert_eq!(r.aggregate, dec!(0.75));
        assert_eq!(r.cells, 4);
    }
}
