//! Exact optimum over every feasible schedule, by dynamic programming over
//! charge levels.
//!
//! Levels are spaced one step `min(R, B_c - C_min)` apart and each period
//! moves at most one step, so the grid reaches every schedule vertex when
//! the swing and the initial offset are whole multiples of the step. Cash
//! is accumulated in time order with the same per-order arithmetic as
//! [`settle`](super::settle), which keeps the optimum exactly comparable to
//! any settled schedule.

use rust_decimal::Decimal;

use super::{merged_prices, EvaluationError, Result};
use crate::battery::BatterySpec;
use crate::market_data::{check_dual_windows, PriceSeries};
use crate::strategies::{order_cash, Side};

fn dp_over(prices: &[Decimal], spec: &BatterySpec) -> Result<Decimal> {
    let swing = spec.capacity - spec.min_charge;
    if swing.is_zero() {
        return Ok(Decimal::ZERO);
    }
    let tick = spec.ramp.min(swing);
    let offset = spec.initial_charge - spec.min_charge;
    if swing.milli() % tick.milli() != 0 || offset.milli() % tick.milli() != 0 {
        return Err(EvaluationError::NonCommensurateRamp { swing, offset, tick });
    }
    let levels = (swing.milli() / tick.milli()) as usize + 1;
    let mut value: Vec<Option<Decimal>> = vec![None; levels];
    value[(offset.milli() / tick.milli()) as usize] = Some(Decimal::ZERO);
    for &p in prices {
        let buy = order_cash(Side::Buy, p, tick, spec);
        let sell = order_cash(Side::Sell, p, tick, spec);
        let next: Vec<Option<Decimal>> = (0..levels)
            .map(|l| {
                let from_below = l.checked_sub(1).and_then(|k| value[k]).map(|v| v + buy);
                let from_above = value.get(l + 1).copied().flatten().map(|v| v + sell);
                [value[l], from_below, from_above].into_iter().flatten().max()
            })
            .collect();
        value = next;
    }
    Ok(value.into_iter().flatten().max().unwrap_or(Decimal::ZERO))
}

pub fn dp_optimal(actuals: &PriceSeries, spec: &BatterySpec) -> Result<Decimal> {
    dp_over(&actuals.prices, spec)
}

/// Optimum over one battery trading both markets on the merged event line.
pub fn dp_optimal_dual(dam_actuals: &PriceSeries, bm_actuals: &PriceSeries, spec: &BatterySpec) -> Result<Decimal> {
    check_dual_windows(&dam_actuals.window, &bm_actuals.window)?;
    dp_over(&merged_prices(dam_actuals, bm_actuals), spec)
}
