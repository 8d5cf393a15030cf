//! TS3 across one DAM day and the BM window opening with it.
//!
//! Both markets drive one battery, so orders are placed on a single merged
//! event line: DAM hour `h` at minute `60h`, BM slot `s` at minute `30s`,
//! with the DAM event first when both start together.

use std::ops::Range;

use serde::Serialize;

use super::pairs::Pricing;
use super::timeline::Timeline;
use super::ts::{execute_on_timeline, run_ts3_worklist};
use super::{order_cash, PairRule, QuantilePair, Result, Schedule, ScheduleViolation, Strategy, TradeOrder};
use crate::battery::{self, BatterySpec, BatteryState};
use crate::market_data::{check_dual_windows, DualHorizon, MarketKind, DUAL_BM_SLOTS};

const DAM_HOURS: usize = 24;

/// Number of events on the merged line.
pub const DUAL_EVENTS: usize = DAM_HOURS + DUAL_BM_SLOTS;

/// Position of DAM hour `hour` on the merged event line.
pub fn dam_event(hour: usize) -> usize {
    hour + (2 * hour).min(DUAL_BM_SLOTS)
}

/// Position of BM slot `slot` on the merged event line.
pub fn bm_event(slot: usize) -> usize {
    slot + slot / 2 + 1
}

/// BM slots before (`ps1`) and after (`ps3`) the first DAM pair's span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DualPartition {
    /// Inclusive DAM hours of the first pair, if one traded.
    pub dam_span: Option<(usize, usize)>,
    pub ps1: Range<usize>,
    pub ps3: Range<usize>,
}

/// Splits the BM window around DAM hours `first..=last`.
pub fn bm_partition(first: usize, last: usize) -> DualPartition {
    let ps1_end = DualHorizon::first_slot_of_hour(first).min(DUAL_BM_SLOTS);
    let ps3_start = DualHorizon::first_slot_of_hour(last + 1).min(DUAL_BM_SLOTS);
    DualPartition {
        dam_span: Some((first, last)),
        ps1: 0..ps1_end,
        ps3: ps3_start..DUAL_BM_SLOTS,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualSchedule {
    pub dam: Schedule,
    pub bm: Schedule,
    pub partition: DualPartition,
}

impl DualSchedule {
    /// Orders of both markets in merged event order.
    pub fn merged(&self) -> Vec<(MarketKind, &TradeOrder)> {
        let mut all: Vec<(usize, MarketKind, &TradeOrder)> = self
            .dam
            .orders
            .iter()
            .map(|o| (dam_event(o.period), MarketKind::Dam, o))
            .chain(self.bm.orders.iter().map(|o| (bm_event(o.period), MarketKind::Bm, o)))
            .collect();
        all.sort_by_key(|(e, _, _)| *e);
        all.into_iter().map(|(_, m, o)| (m, o)).collect()
    }

    pub fn trade_count(&self) -> usize {
        self.dam.trade_count() + self.bm.trade_count()
    }

    /// Replays both markets' orders in merged order; a violation's `index`
    /// refers to that order.
    pub fn replay_from(&self, spec: &BatterySpec, start: BatteryState) -> Result<BatteryState, ScheduleViolation> {
        let merged = self.merged();
        battery::replay(spec, start, merged.iter().map(|(_, o)| o.signed_volume())).map_err(|(index, source)| {
            ScheduleViolation {
                index,
                period: merged[index].1.period,
                source,
            }
        })
    }

    pub fn replay(&self, spec: &BatterySpec) -> Result<BatteryState, ScheduleViolation> {
        self.replay_from(spec, spec.initial_state())
    }

    pub fn expected_cash(&self, spec: &BatterySpec) -> rust_decimal::Decimal {
        self.merged()
            .iter()
            .fold(rust_decimal::Decimal::ZERO, |acc, (_, o)| {
                acc + order_cash(o.side, o.expected_price, o.volume, spec)
            })
    }
}

pub fn ts3_dual(horizon: &DualHorizon, pair: QuantilePair, spec: &BatterySpec) -> Result<DualSchedule> {
    ts3_dual_with(horizon, pair, spec, PairRule::Conservative)
}

/// The first DAM pair is placed first. The BM slots before and after its
/// span are then worked as TS3 ranges, and finally the DAM hours strictly
/// inside the span, all against one shared event line. Without a DAM pair
/// the whole BM window is worked as TS3.
pub fn ts3_dual_with(
    horizon: &DualHorizon,
    pair: QuantilePair,
    spec: &BatterySpec,
    rule: PairRule,
) -> Result<DualSchedule> {
    check_dual_windows(&horizon.dam.window, &horizon.bm.window)?;
    let dam_pricing = Pricing::new(&horizon.dam, pair, rule)?;
    let bm_pricing = Pricing::new(&horizon.bm, pair, rule)?;
    let mut line = Timeline::new(spec.initial_charge, DUAL_EVENTS);
    let mut dam_orders = Vec::new();
    let mut bm_orders = Vec::new();

    let partition = match dam_pricing.best_unordered(spec, 0, DAM_HOURS - 1) {
        Some(c) => {
            let (buy, sell) = execute_on_timeline(&c, &mut line, spec, &dam_event);
            dam_orders.extend(buy.into_iter().chain(sell));
            let first = c.buy_period.min(c.sell_period);
            let last = c.buy_period.max(c.sell_period);
            let partition = bm_partition(first, last);
            let bm_ranges = [partition.ps1.clone(), partition.ps3.clone()]
                .into_iter()
                .filter(|r| r.len() >= 2)
                .map(|r| (r.start, r.end - 1));
            run_ts3_worklist(&bm_pricing, spec, &mut line, &bm_event, bm_ranges, &mut bm_orders);
            if last > first + 2 {
                run_ts3_worklist(&dam_pricing, spec, &mut line, &dam_event, [(first + 1, last - 1)], &mut dam_orders);
            }
            partition
        }
        None => {
            run_ts3_worklist(&bm_pricing, spec, &mut line, &bm_event, [(0, DUAL_BM_SLOTS - 1)], &mut bm_orders);
            DualPartition {
                dam_span: None,
                ps1: 0..DUAL_BM_SLOTS,
                ps3: DUAL_BM_SLOTS..DUAL_BM_SLOTS,
            }
        }
    };
    Ok(DualSchedule {
        dam: Schedule::from_orders(horizon.dam.window, Strategy::Ts3, dam_orders),
        bm: Schedule::from_orders(horizon.bm.window, Strategy::Ts3, bm_orders),
        partition,
    })
}
