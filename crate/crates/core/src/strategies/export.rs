use std::io::Write;

use rust_decimal::Decimal;
use serde::Serialize;

use super::{QuantilePair, Schedule, Side, Strategy};
use crate::battery::BatterySpec;
use crate::market_data::{format_timestamp, MarketKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderDoc {
    pub period_index: usize,
    pub timestamp: String,
    pub side: Side,
    pub volume_mwh: Decimal,
    pub expected_price: Decimal,
}

/// JSON form of a schedule, tied to the battery it was planned for.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleDoc {
    pub strategy: Strategy,
    pub pair: QuantilePair,
    pub spec_digest: String,
    pub market: MarketKind,
    pub window_start: String,
    pub orders: Vec<OrderDoc>,
}

fn order_docs(schedule: &Schedule) -> Vec<OrderDoc> {
    schedule
        .orders
        .iter()
        .map(|o| OrderDoc {
            period_index: o.period,
            timestamp: format_timestamp(schedule.window.timestamp(o.period)),
            side: o.side,
            volume_mwh: o.volume.mwh(),
            expected_price: o.expected_price,
        })
        .collect()
}

impl ScheduleDoc {
    pub fn new(schedule: &Schedule, pair: QuantilePair, spec: &BatterySpec) -> Self {
        ScheduleDoc {
            strategy: schedule.strategy,
            pair,
            spec_digest: spec.digest(),
            market: schedule.window.market,
            window_start: format_timestamp(schedule.window.start),
            orders: order_docs(schedule),
        }
    }
}

/// Writes `period_index,timestamp,side,volume_mwh,expected_price` rows for
/// every schedule in turn, under one header.
pub fn write_schedule_csv<'a, W: Write>(
    out: W,
    schedules: impl IntoIterator<Item = &'a Schedule>,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["period_index", "timestamp", "side", "volume_mwh", "expected_price"])?;
    for s in schedules {
        for o in order_docs(s) {
            w.write_record([
                o.period_index.to_string(),
                o.timestamp,
                o.side.to_string(),
                o.volume_mwh.to_string(),
                o.expected_price.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
