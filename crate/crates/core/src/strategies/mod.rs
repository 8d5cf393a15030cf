//! Quantile-forecast trading strategies.
//!
//! * TS1: a single buy-then-sell pair per window.
//! * TS2: TS1 applied recursively before and after each chosen pair.
//! * TS3: unordered min/max pairs executed through the charge/discharge
//!   bottleneck, recursing before, between and after each pair.
//! * TS3-Dual: TS3 across a DAM day and the BM window that opens with it.
//!
//! A quantile pair `(a, b)` prices the sell side on the lower curve `a` and
//! the buy side on the upper curve `b`, so the expected spread of buying at
//! `t1` and selling at `t2` is `E_d * p_a[t2] - p_b[t1] / E_c`.

mod dual;
mod export;
mod pairs;
mod timeline;
mod ts;

use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{self, BatteryError, BatterySpec, BatteryState, Energy};
use crate::market_data::{MarketDataError, QuantileForecast, TradingWindow};

pub use dual::{bm_event, bm_partition, dam_event, ts3_dual, ts3_dual_with, DualPartition, DualSchedule, DUAL_EVENTS};
pub use export::{write_schedule_csv, OrderDoc, ScheduleDoc};
pub use pairs::{best_ordered_pair, best_ordered_pair_with, best_unordered_pair, best_unordered_pair_with};
pub use ts::{bottleneck_execute, ts1, ts1_with, ts2, ts2_with, ts3, ts3_with, BottleneckOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("quantile level {0} is not in the forecast")]
    LevelMissing(Decimal),
    #[error("range [{lo}, {hi}] does not fit a {len}-period window")]
    InvalidRange { lo: usize, hi: usize, len: usize },
    #[error("invalid quantile pair: {0}")]
    InvalidPair(String),
    #[error(transparent)]
    Market(#[from] MarketDataError),
}

pub type Result<T, E = StrategyError> = std::result::Result<T, E>;

/// Sell side priced at the lower level, buy side at the upper level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct QuantilePair {
    sell_level: Decimal,
    buy_level: Decimal,
}

impl QuantilePair {
    pub fn new(sell_level: Decimal, buy_level: Decimal) -> Result<Self> {
        if sell_level <= Decimal::ZERO || buy_level >= Decimal::ONE {
            return Err(StrategyError::InvalidPair(format!(
                "levels {sell_level}:{buy_level} must lie in (0, 1)"
            )));
        }
        if sell_level > buy_level {
            return Err(StrategyError::InvalidPair(format!(
                "sell level {sell_level} exceeds buy level {buy_level}"
            )));
        }
        Ok(QuantilePair {
            sell_level: sell_level.normalize(),
            buy_level: buy_level.normalize(),
        })
    }

    pub fn median() -> Self {
        QuantilePair::new(Decimal::new(5, 1), Decimal::new(5, 1)).expect("0.5:0.5 is valid")
    }

    pub fn sell_level(&self) -> Decimal {
        self.sell_level
    }

    pub fn buy_level(&self) -> Decimal {
        self.buy_level
    }

    /// Table label, e.g. `0.5-0.7`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.sell_level, self.buy_level)
    }
}

/// The seven pairs of the reference results table, in column order.
pub fn reference_pairs() -> Vec<QuantilePair> {
    [(5, 5), (1, 3), (3, 5), (5, 7), (7, 9), (3, 7), (1, 9)]
        .into_iter()
        .map(|(a, b)| QuantilePair::new(Decimal::new(a, 1), Decimal::new(b, 1)).expect("valid pair"))
        .collect()
}

impl fmt::Display for QuantilePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.sell_level, self.buy_level)
    }
}

impl FromStr for QuantilePair {
    type Err = StrategyError;
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| StrategyError::InvalidPair(format!("`{s}` is not of the form a:b")))?;
        let parse = |t: &str| {
            Decimal::from_str(t.trim()).map_err(|_| StrategyError::InvalidPair(format!("`{t}` is not a number")))
        };
        QuantilePair::new(parse(a)?, parse(b)?)
    }
}

impl From<QuantilePair> for String {
    fn from(p: QuantilePair) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for QuantilePair {
    type Error = StrategyError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// How a range's candidate pair is priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairRule {
    /// Sell on the lower curve, buy on the upper curve.
    #[default]
    Conservative,
    /// Price both sides on one curve at a time and keep whichever of the
    /// lower-curve and upper-curve pairs has the larger spread.
    SingleCurve,
}

impl FromStr for PairRule {
    type Err = StrategyError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conservative" => Ok(PairRule::Conservative),
            "single-curve" => Ok(PairRule::SingleCurve),
            other => Err(StrategyError::InvalidPair(format!("unknown pair rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "TS1")]
    Ts1,
    #[serde(rename = "TS2")]
    Ts2,
    #[serde(rename = "TS3")]
    Ts3,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Ts1, Strategy::Ts2, Strategy::Ts3];

    /// TS1 and TS2 trade without a discharge limit: ramp is lifted to capacity.
    pub fn effective_spec(self, spec: &BatterySpec) -> BatterySpec {
        match self {
            Strategy::Ts1 | Strategy::Ts2 => BatterySpec {
                ramp: spec.capacity.max(spec.ramp),
                ..spec.clone()
            },
            Strategy::Ts3 => spec.clone(),
        }
    }

    /// Runs the strategy for a battery described by `spec`; the schedule
    /// replays cleanly under [`Strategy::effective_spec`].
    pub fn run(self, forecast: &QuantileForecast, pair: QuantilePair, spec: &BatterySpec, rule: PairRule) -> Result<Schedule> {
        let eff = self.effective_spec(spec);
        match self {
            Strategy::Ts1 => ts1_with(forecast, pair, &eff, rule),
            Strategy::Ts2 => ts2_with(forecast, pair, &eff, rule),
            Strategy::Ts3 => ts3_with(forecast, pair, &eff, rule),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Ts1 => "TS1",
            Strategy::Ts2 => "TS2",
            Strategy::Ts3 => "TS3",
        })
    }
}

impl FromStr for Strategy {
    type Err = StrategyError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ts1" => Ok(Strategy::Ts1),
            "ts2" => Ok(Strategy::Ts2),
            "ts3" => Ok(Strategy::Ts3),
            other => Err(StrategyError::InvalidPair(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TradeOrder {
    pub period: usize,
    pub side: Side,
    pub volume: Energy,
    /// Forecast price the decision was made on.
    pub expected_price: Decimal,
}

impl TradeOrder {
    pub fn signed_volume(&self) -> Energy {
        match self.side {
            Side::Buy => self.volume,
            Side::Sell => -self.volume,
        }
    }
}

/// Cash for trading `volume` at `price`: sales earn `price * volume * E_d`,
/// purchases cost `price * volume / E_c`.
pub fn order_cash(side: Side, price: Decimal, volume: Energy, spec: &BatterySpec) -> Decimal {
    let gross = price * volume.mwh();
    match side {
        Side::Sell => gross * spec.discharge_eff,
        Side::Buy => -(gross / spec.charge_eff),
    }
}

/// Expected spread per MWh of buying at `buy` and selling at `sell`.
pub fn unit_spread(sell: Decimal, buy: Decimal, spec: &BatterySpec) -> Decimal {
    sell * spec.discharge_eff - buy / spec.charge_eff
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidatePair {
    pub buy_period: usize,
    pub sell_period: usize,
    pub buy_price: Decimal,
    pub sell_price: Decimal,
    pub expected_spread: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("order {index} (period {period}): {source}")]
pub struct ScheduleViolation {
    pub index: usize,
    pub period: usize,
    pub source: BatteryError,
}

/// Orders for one trading window, sorted by period, at most one per period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub window: TradingWindow,
    pub orders: Vec<TradeOrder>,
    pub strategy: Strategy,
}

impl Schedule {
    pub fn empty(window: TradingWindow, strategy: Strategy) -> Self {
        Schedule {
            window,
            orders: Vec::new(),
            strategy,
        }
    }

    pub(crate) fn from_orders(window: TradingWindow, strategy: Strategy, mut orders: Vec<TradeOrder>) -> Self {
        orders.sort_by_key(|o| o.period);
        debug_assert!(orders.windows(2).all(|w| w[0].period < w[1].period));
        Schedule {
            window,
            orders,
            strategy,
        }
    }

    pub fn trade_count(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    /// Replays the orders from `start`, returning the final state.
    pub fn replay_from(&self, spec: &BatterySpec, start: BatteryState) -> Result<BatteryState, ScheduleViolation> {
        battery::replay(spec, start, self.orders.iter().map(TradeOrder::signed_volume)).map_err(|(index, source)| {
            ScheduleViolation {
                index,
                period: self.orders[index].period,
                source,
            }
        })
    }

    pub fn replay(&self, spec: &BatterySpec) -> Result<BatteryState, ScheduleViolation> {
        self.replay_from(spec, spec.initial_state())
    }

    /// Cash the strategy expected at its forecast prices.
    pub fn expected_cash(&self, spec: &BatterySpec) -> Decimal {
        self.orders
            .iter()
            .fold(Decimal::ZERO, |acc, o| acc + order_cash(o.side, o.expected_price, o.volume, spec))
    }

    /// True when every sell's most recent predecessor is a buy and every
    /// buy is followed by a sell before the next buy.
    pub fn alternates(&self) -> bool {
        self.orders.iter().enumerate().all(|(i, o)| match o.side {
            Side::Buy => i % 2 == 0,
            Side::Sell => i % 2 == 1,
        }) && self.orders.len().is_multiple_of(2)
    }
}
