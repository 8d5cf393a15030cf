//! Battery state machine: capacity, ramp, floor and efficiency constraints.
//!
//! Stored energy is tracked in integer milli-MWh ticks so that clip
//! comparisons are exact. Efficiency losses never touch stored energy; they
//! are applied to cash flows by the settlement code.

use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Energy in milli-MWh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Energy(i64);

impl Energy {
    pub const ZERO: Energy = Energy(0);
    const TICKS_PER_MWH: i64 = 1000;

    pub const fn from_milli(ticks: i64) -> Self {
        Energy(ticks)
    }

    /// Rounds to the nearest milli-MWh.
    pub fn from_mwh(mwh: f64) -> Self {
        Energy((mwh * Self::TICKS_PER_MWH as f64).round() as i64)
    }

    pub fn from_decimal(mwh: Decimal) -> Self {
        let ticks = (mwh * Decimal::from(Self::TICKS_PER_MWH)).round();
        Energy(i64::try_from(ticks).unwrap_or(if ticks.is_sign_negative() { i64::MIN } else { i64::MAX }))
    }

    pub const fn milli(self) -> i64 {
        self.0
    }

    pub fn mwh(self) -> Decimal {
        Decimal::new(self.0, 3)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / Self::TICKS_PER_MWH as f64
    }

    pub fn abs(self) -> Self {
        Energy(self.0.abs())
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl Sub for Energy {
    type Output = Energy;
    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0 - rhs.0)
    }
}

impl Neg for Energy {
    type Output = Energy;
    fn neg(self) -> Energy {
        Energy(-self.0)
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.mwh())
    }
}

impl FromStr for Energy {
    type Err = rust_decimal::Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Decimal::from_str(s.trim()).map(Energy::from_decimal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BatteryError {
    #[error("ramp violation: |{requested}| MWh exceeds ramp {ramp} MWh")]
    RampViolation { requested: Energy, ramp: Energy },
    #[error("capacity violation: charge would reach {would_be} MWh, capacity is {capacity} MWh")]
    CapacityViolation { would_be: Energy, capacity: Energy },
    #[error("floor violation: charge would reach {would_be} MWh, floor is {min_charge} MWh")]
    FloorViolation { would_be: Energy, min_charge: Energy },
    #[error("invalid battery spec: {0}")]
    InvalidSpec(String),
}

/// Physical battery parameters. Quantities are per settlement period.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatterySpec {
    pub capacity: Energy,
    pub ramp: Energy,
    pub min_charge: Energy,
    pub charge_eff: Decimal,
    pub discharge_eff: Decimal,
    pub initial_charge: Energy,
}

impl BatterySpec {
    /// Builds a spec whose battery starts at the floor.
    pub fn new(
        capacity: Energy,
        ramp: Energy,
        min_charge: Energy,
        charge_eff: Decimal,
        discharge_eff: Decimal,
    ) -> Result<Self, BatteryError> {
        let spec = BatterySpec {
            capacity,
            ramp,
            min_charge,
            charge_eff,
            discharge_eff,
            initial_charge: min_charge,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The 1 MWh reference battery used for the strategy backtests:
    /// full swing per period, 98% charge and 80% discharge efficiency.
    pub fn reference() -> Self {
        BatterySpec {
            capacity: Energy::from_milli(1000),
            ramp: Energy::from_milli(1000),
            min_charge: Energy::ZERO,
            charge_eff: Decimal::new(98, 2),
            discharge_eff: Decimal::new(8, 1),
            initial_charge: Energy::ZERO,
        }
    }

    pub fn with_initial_charge(mut self, charge: Energy) -> Result<Self, BatteryError> {
        self.initial_charge = charge;
        self.validate()?;
        Ok(self)
    }

    pub fn with_ramp(mut self, ramp: Energy) -> Result<Self, BatteryError> {
        self.ramp = ramp;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), BatteryError> {
        let bad = |m: &str| Err(BatteryError::InvalidSpec(m.to_string()));
        if self.min_charge < Energy::ZERO {
            return bad("min_charge must be non-negative");
        }
        if self.min_charge > self.initial_charge || self.initial_charge > self.capacity {
            return bad("require min_charge <= initial_charge <= capacity");
        }
        if !self.ramp.is_positive() {
            return bad("ramp must be positive");
        }
        let unit = Decimal::ONE;
        if self.charge_eff <= Decimal::ZERO || self.charge_eff > unit {
            return bad("charge_eff must lie in (0, 1]");
        }
        if self.discharge_eff <= Decimal::ZERO || self.discharge_eff > unit {
            return bad("discharge_eff must lie in (0, 1]");
        }
        Ok(())
    }

    pub fn initial_state(&self) -> BatteryState {
        BatteryState {
            charge: self.initial_charge,
        }
    }

    /// Usable energy between floor and capacity.
    pub fn swing(&self) -> Energy {
        self.capacity - self.min_charge
    }

    /// Short hex digest of the canonical JSON form; identifies the spec in reports.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(&BatterySpecDoc::from(self)).expect("spec serializes");
        let hash = Sha256::digest(json.as_bytes());
        hex::encode(&hash[..8])
    }

    pub fn from_json(text: &str) -> Result<Self, BatteryError> {
        let doc: BatterySpecDoc = serde_json::from_str(text)
            .map_err(|e| BatteryError::InvalidSpec(e.to_string()))?;
        BatterySpec::try_from(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&BatterySpecDoc::from(self)).expect("spec serializes")
    }
}

/// JSON document form of [`BatterySpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySpecDoc {
    pub capacity_mwh: f64,
    pub ramp_mwh_per_period: f64,
    #[serde(default)]
    pub min_charge_mwh: f64,
    pub charge_eff: f64,
    pub discharge_eff: f64,
    /// Defaults to `min_charge_mwh`.
    #[serde(default)]
    pub initial_charge_mwh: Option<f64>,
}

fn decimal_of(x: f64) -> Result<Decimal, BatteryError> {
    // shortest round-trip text keeps 0.98 as 0.98
    Decimal::from_str(&format!("{x}"))
        .or_else(|_| Decimal::from_scientific(&format!("{x:e}")))
        .map_err(|e| BatteryError::InvalidSpec(format!("{x}: {e}")))
}

impl TryFrom<BatterySpecDoc> for BatterySpec {
    type Error = BatteryError;

    fn try_from(doc: BatterySpecDoc) -> Result<Self, Self::Error> {
        for (name, v) in [
            ("capacity_mwh", doc.capacity_mwh),
            ("ramp_mwh_per_period", doc.ramp_mwh_per_period),
            ("min_charge_mwh", doc.min_charge_mwh),
            ("charge_eff", doc.charge_eff),
            ("discharge_eff", doc.discharge_eff),
        ] {
            if !v.is_finite() {
                return Err(BatteryError::InvalidSpec(format!("{name} must be finite")));
            }
        }
        let min_charge = Energy::from_mwh(doc.min_charge_mwh);
        let spec = BatterySpec {
            capacity: Energy::from_mwh(doc.capacity_mwh),
            ramp: Energy::from_mwh(doc.ramp_mwh_per_period),
            min_charge,
            charge_eff: decimal_of(doc.charge_eff)?,
            discharge_eff: decimal_of(doc.discharge_eff)?,
            initial_charge: doc.initial_charge_mwh.map(Energy::from_mwh).unwrap_or(min_charge),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<&BatterySpec> for BatterySpecDoc {
    fn from(s: &BatterySpec) -> Self {
        use rust_decimal::prelude::ToPrimitive;
        BatterySpecDoc {
            capacity_mwh: s.capacity.as_f64(),
            ramp_mwh_per_period: s.ramp.as_f64(),
            min_charge_mwh: s.min_charge.as_f64(),
            charge_eff: s.charge_eff.to_f64().unwrap_or(f64::NAN),
            discharge_eff: s.discharge_eff.to_f64().unwrap_or(f64::NAN),
            initial_charge_mwh: Some(s.initial_charge.as_f64()),
        }
    }
}

/// Energy currently stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatteryState {
    pub charge: Energy,
}

impl BatteryState {
    pub fn new(charge: Energy) -> Self {
        BatteryState { charge }
    }
}

/// Charging bottleneck: `min(capacity - charge, ramp)`, never negative.
pub fn max_buy(state: BatteryState, spec: &BatterySpec) -> Energy {
    (spec.capacity - state.charge).min(spec.ramp).max(Energy::ZERO)
}

/// Discharging bottleneck: `min(charge - min_charge, ramp)`, never negative.
pub fn max_sell(state: BatteryState, spec: &BatterySpec) -> Energy {
    (state.charge - spec.min_charge).min(spec.ramp).max(Energy::ZERO)
}

/// Applies a signed trade (positive buys, negative sells).
pub fn apply_trade(
    state: BatteryState,
    spec: &BatterySpec,
    signed_qty: Energy,
) -> Result<BatteryState, BatteryError> {
    if signed_qty.abs() > spec.ramp {
        return Err(BatteryError::RampViolation {
            requested: signed_qty,
            ramp: spec.ramp,
        });
    }
    let would_be = state.charge + signed_qty;
    if would_be > spec.capacity {
        return Err(BatteryError::CapacityViolation {
            would_be,
            capacity: spec.capacity,
        });
    }
    if would_be < spec.min_charge {
        return Err(BatteryError::FloorViolation {
            would_be,
            min_charge: spec.min_charge,
        });
    }
    Ok(BatteryState { charge: would_be })
}

/// Replays signed trades in order, reporting the index of the first illegal one.
pub fn replay<I>(spec: &BatterySpec, start: BatteryState, trades: I) -> Result<BatteryState, (usize, BatteryError)>
where
    I: IntoIterator<Item = Energy>,
{
    trades
        .into_iter()
        .enumerate()
        .try_fold(start, |s, (i, q)| apply_trade(s, spec, q).map_err(|e| (i, e)))
}
