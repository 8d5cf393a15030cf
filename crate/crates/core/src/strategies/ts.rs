use std::collections::VecDeque;

use rust_decimal::Decimal;

use super::pairs::Pricing;
use super::timeline::Timeline;
use super::{order_cash, CandidatePair, PairRule, QuantilePair, Result, Schedule, Side, Strategy, TradeOrder};
use crate::battery::{max_buy, max_sell, BatterySpec, BatteryState, Energy};
use crate::market_data::QuantileForecast;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BottleneckOutcome {
    pub buy: Option<TradeOrder>,
    pub sell: Option<TradeOrder>,
    pub state: BatteryState,
    /// `p_max * x_sell * E_d - p_min * x_buy / E_c` at the candidate's prices.
    pub cash: Decimal,
}

fn order(period: usize, side: Side, volume: Energy, price: Decimal) -> Option<TradeOrder> {
    volume.is_positive().then_some(TradeOrder {
        period,
        side,
        volume,
        expected_price: price,
    })
}

fn pair_cash(buy: Energy, sell: Energy, c: &CandidatePair, spec: &BatterySpec) -> Decimal {
    order_cash(Side::Sell, c.sell_price, sell, spec) + order_cash(Side::Buy, c.buy_price, buy, spec)
}

/// Charging/discharging bottleneck for one candidate pair.
///
/// Buy first when the buy period is earlier: `x_buy = min(B_c - c, R)`,
/// then `x_sell = min(c - C_min, R)` on the raised charge. Otherwise sell
/// first with the mirrored clips. Zero-volume legs produce no order.
pub fn bottleneck_execute(candidate: &CandidatePair, state: BatteryState, spec: &BatterySpec) -> BottleneckOutcome {
    let mut c = state;
    let (x_buy, x_sell);
    if candidate.buy_period < candidate.sell_period {
        x_buy = max_buy(c, spec);
        c.charge = c.charge + x_buy;
        x_sell = max_sell(c, spec);
        c.charge = c.charge - x_sell;
    } else {
        x_sell = max_sell(c, spec);
        c.charge = c.charge - x_sell;
        x_buy = max_buy(c, spec);
        c.charge = c.charge + x_buy;
    }
    BottleneckOutcome {
        buy: order(candidate.buy_period, Side::Buy, x_buy, candidate.buy_price),
        sell: order(candidate.sell_period, Side::Sell, x_sell, candidate.sell_price),
        state: c,
        cash: pair_cash(x_buy, x_sell, candidate, spec),
    }
}

/// The bottleneck evaluated against trades already committed elsewhere in
/// the window. With `L` the committed charge levels, a buy-first pair at
/// `t1 < t2` takes
///
/// * `x_buy  = min(R, B_c - max L[t1..t2])`
/// * `x_sell = min(R, min L[t2..] + x_buy - C_min)`
///
/// and a sell-first pair mirrors it. Every level stays within
/// `[C_min, B_c]` when replayed in time order; on an empty timeline the
/// volumes are exactly those of [`bottleneck_execute`].
pub(crate) fn execute_on_timeline(
    candidate: &CandidatePair,
    timeline: &mut Timeline,
    spec: &BatterySpec,
    event_of: &dyn Fn(usize) -> usize,
) -> (Option<TradeOrder>, Option<TradeOrder>) {
    let buy_event = event_of(candidate.buy_period);
    let sell_event = event_of(candidate.sell_period);
    let end = timeline.len();
    let (x_buy, x_sell);
    if buy_event < sell_event {
        let (_, held_max) = timeline.extrema(buy_event, sell_event);
        x_buy = (spec.capacity - held_max).min(spec.ramp).max(Energy::ZERO);
        let (after_min, _) = timeline.extrema(sell_event, end);
        x_sell = (after_min + x_buy - spec.min_charge).min(spec.ramp).max(Energy::ZERO);
    } else {
        let (held_min, _) = timeline.extrema(sell_event, buy_event);
        x_sell = (held_min - spec.min_charge).min(spec.ramp).max(Energy::ZERO);
        let (_, after_max) = timeline.extrema(buy_event, end);
        x_buy = (spec.capacity - after_max + x_sell).min(spec.ramp).max(Energy::ZERO);
    }
    timeline.commit(buy_event, x_buy);
    timeline.commit(sell_event, -x_sell);
    (
        order(candidate.buy_period, Side::Buy, x_buy, candidate.buy_price),
        order(candidate.sell_period, Side::Sell, x_sell, candidate.sell_price),
    )
}

/// TS3 work-list over the given starting ranges (inclusive bounds),
/// first-in-first-out. Every range that yields a pair is split into the
/// parts before, between and after the pair.
pub(crate) fn run_ts3_worklist(
    pricing: &Pricing,
    spec: &BatterySpec,
    timeline: &mut Timeline,
    event_of: &dyn Fn(usize) -> usize,
    ranges: impl IntoIterator<Item = (usize, usize)>,
    orders: &mut Vec<TradeOrder>,
) {
    let mut queue: VecDeque<(usize, usize)> = ranges.into_iter().collect();
    while let Some((lo, hi)) = queue.pop_front() {
        let Some(c) = pricing.best_unordered(spec, lo, hi) else {
            continue;
        };
        let (buy, sell) = execute_on_timeline(&c, timeline, spec, event_of);
        orders.extend(buy.into_iter().chain(sell));
        split_around(&mut queue, lo, hi, c.buy_period.min(c.sell_period), c.buy_period.max(c.sell_period), true);
    }
}

/// Pushes the non-trivial parts of `[lo, hi]` outside (and optionally
/// strictly inside) the span `[first, last]`.
fn split_around(queue: &mut VecDeque<(usize, usize)>, lo: usize, hi: usize, first: usize, last: usize, inner: bool) {
    if first > lo + 1 {
        queue.push_back((lo, first - 1));
    }
    if inner && last > first + 2 {
        queue.push_back((first + 1, last - 1));
    }
    if hi > last + 1 {
        queue.push_back((last + 1, hi));
    }
}

pub fn ts1(forecast: &QuantileForecast, pair: QuantilePair, spec: &BatterySpec) -> Result<Schedule> {
    ts1_with(forecast, pair, spec, PairRule::Conservative)
}

/// One buy-then-sell pair at full swing, or nothing.
pub fn ts1_with(forecast: &QuantileForecast, pair: QuantilePair, spec: &BatterySpec, rule: PairRule) -> Result<Schedule> {
    let pricing = Pricing::new(forecast, pair, rule)?;
    let volume = spec.capacity - spec.initial_charge;
    let mut orders = Vec::new();
    if let Some(c) = pricing.best_ordered(spec, 0, pricing.len() - 1) {
        push_full_swing(&mut orders, &c, volume);
    }
    Ok(Schedule::from_orders(forecast.window, Strategy::Ts1, orders))
}

fn push_full_swing(orders: &mut Vec<TradeOrder>, c: &CandidatePair, volume: Energy) {
    orders.extend(order(c.buy_period, Side::Buy, volume, c.buy_price));
    orders.extend(order(c.sell_period, Side::Sell, volume, c.sell_price));
}

pub fn ts2(forecast: &QuantileForecast, pair: QuantilePair, spec: &BatterySpec) -> Result<Schedule> {
    ts2_with(forecast, pair, spec, PairRule::Conservative)
}

/// TS1 repeated on the ranges before and after every chosen pair.
pub fn ts2_with(forecast: &QuantileForecast, pair: QuantilePair, spec: &BatterySpec, rule: PairRule) -> Result<Schedule> {
    let pricing = Pricing::new(forecast, pair, rule)?;
    let volume = spec.capacity - spec.initial_charge;
    let mut orders = Vec::new();
    let mut queue = VecDeque::from([(0, pricing.len() - 1)]);
    while let Some((lo, hi)) = queue.pop_front() {
        let Some(c) = pricing.best_ordered(spec, lo, hi) else {
            continue;
        };
        push_full_swing(&mut orders, &c, volume);
        split_around(&mut queue, lo, hi, c.buy_period, c.sell_period, false);
    }
    Ok(Schedule::from_orders(forecast.window, Strategy::Ts2, orders))
}

pub fn ts3(forecast: &QuantileForecast, pair: QuantilePair, spec: &BatterySpec) -> Result<Schedule> {
    ts3_with(forecast, pair, spec, PairRule::Conservative)
}

pub fn ts3_with(forecast: &QuantileForecast, pair: QuantilePair, spec: &BatterySpec, rule: PairRule) -> Result<Schedule> {
    let pricing = Pricing::new(forecast, pair, rule)?;
    let n = pricing.len();
    let mut timeline = Timeline::new(spec.initial_charge, n);
    let mut orders = Vec::new();
    run_ts3_worklist(&pricing, spec, &mut timeline, &|p| p, [(0, n - 1)], &mut orders);
    Ok(Schedule::from_orders(forecast.window, Strategy::Ts3, orders))
}
