//! Multi-year return on investment for a battery: cumulative cash position
//! per year from construction cost, trading revenue that fades with
//! degradation, escalating maintenance and flat fees. No discounting.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use rust_decimal::{Decimal, MathematicalOps};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::battery::{BatteryError, BatterySpec, Energy};
use crate::evaluation::{cents, BacktestReport};

const SECS_PER_YEAR: i64 = 365 * 86_400;
const BUILTIN_CATALOG: &str = include_str!("../data/batteries.json");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EconError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("backtest span is zero")]
    ZeroSpan,
    #[error("catalog: {0}")]
    Catalog(String),
    #[error("no revenue source: give an explicit revenue or a backtest report")]
    MissingRevenueSource,
    #[error(transparent)]
    Battery(#[from] BatteryError),
}

pub type Result<T, E = EconError> = std::result::Result<T, E>;

/// How a yearly rate accumulates over `k` years.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMode {
    /// `1 ± r k`; this is what the published return curves follow.
    #[default]
    Linear,
    /// `(1 ± r)^k`.
    Compound,
}

impl RateMode {
    fn factor(self, signed_rate: Decimal, k: u32) -> Decimal {
        match self {
            RateMode::Linear => Decimal::ONE + signed_rate * Decimal::from(k),
            RateMode::Compound => (Decimal::ONE + signed_rate).powu(u64::from(k)),
        }
    }
}

impl fmt::Display for RateMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateMode::Linear => "linear",
            RateMode::Compound => "compound",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EconScenario {
    pub capex: Decimal,
    pub base_maintenance: Decimal,
    pub maintenance_escalation: Decimal,
    pub degradation_rate: Decimal,
    pub annual_fees: Decimal,
    pub gross_revenue_base: Decimal,
    pub horizon_years: u32,
    #[serde(default)]
    pub degradation_mode: RateMode,
    #[serde(default)]
    pub escalation_mode: RateMode,
}

impl EconScenario {
    pub const DEFAULT_HORIZON: u32 = 15;

    pub fn default_fees() -> Decimal {
        Decimal::from(18_294)
    }

    pub fn default_escalation() -> Decimal {
        Decimal::new(2, 2)
    }

    pub fn default_degradation() -> Decimal {
        Decimal::new(155, 4)
    }

    /// Default rates, fees and horizon.
    pub fn new(capex: Decimal, base_maintenance: Decimal, gross_revenue_base: Decimal) -> Result<Self> {
        let s = EconScenario {
            capex,
            base_maintenance,
            maintenance_escalation: Self::default_escalation(),
            degradation_rate: Self::default_degradation(),
            annual_fees: Self::default_fees(),
            gross_revenue_base,
            horizon_years: Self::DEFAULT_HORIZON,
            degradation_mode: RateMode::Linear,
            escalation_mode: RateMode::Linear,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_revenue(mut self, g: Decimal) -> Self {
        self.gross_revenue_base = g;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EconError::InvalidScenario(m));
        for (name, v) in [
            ("capex", self.capex),
            ("base_maintenance", self.base_maintenance),
            ("annual_fees", self.annual_fees),
        ] {
            if v.is_sign_negative() && !v.is_zero() {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        for (name, r) in [
            ("maintenance_escalation", self.maintenance_escalation),
            ("degradation_rate", self.degradation_rate),
        ] {
            if r < Decimal::ZERO || r >= Decimal::ONE {
                return bad(format!("{name} must lie in [0, 1), got {r}"));
            }
        }
        if self.horizon_years == 0 {
            return bad("horizon must be at least one year".into());
        }
        Ok(())
    }

    /// Net cash of year `y >= 1`. Linear degradation bottoms out at zero
    /// revenue.
    fn year_cash(&self, y: u32) -> Decimal {
        let k = y - 1;
        let fade = self.degradation_mode.factor(-self.degradation_rate, k).max(Decimal::ZERO);
        let upkeep = self.escalation_mode.factor(self.maintenance_escalation, k);
        self.gross_revenue_base * fade - self.base_maintenance * upkeep - self.annual_fees
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnCurve {
    /// Index is the year, 0 = construction; values in cents.
    pub cumulative: Vec<Decimal>,
    pub breakeven: Option<u32>,
}

/// Cumulative position per year, accumulated exactly and rounded to cents
/// per point.
pub fn annual_return_curve(s: &EconScenario) -> ReturnCurve {
    let mut exact = -s.capex;
    let mut cumulative = vec![cents(exact)];
    for y in 1..=s.horizon_years {
        exact += s.year_cash(y);
        cumulative.push(cents(exact));
    }
    let mut curve = ReturnCurve {
        cumulative,
        breakeven: None,
    };
    curve.breakeven = breakeven_year(&curve);
    curve
}

/// The base revenue that produces the step from `year0` to `year1`. Year 1
/// carries neither degradation nor escalation, so only maintenance and fees
/// need adding back.
pub fn implied_base_revenue(year0: Decimal, year1: Decimal, s: &EconScenario) -> Decimal {
    (year1 - year0) + s.base_maintenance + s.annual_fees
}

/// First year with a non-negative position.
pub fn breakeven_year(curve: &ReturnCurve) -> Option<u32> {
    curve
        .cumulative
        .iter()
        .position(|c| !c.is_sign_negative() || c.is_zero())
        .map(|y| y as u32)
}

/// Scales `profit` earned over `span_secs` to a 365-day year.
pub fn annualize_revenue(profit: Decimal, span_secs: i64) -> Result<Decimal> {
    if span_secs <= 0 {
        return Err(EconError::ZeroSpan);
    }
    Ok(cents(profit * Decimal::from(SECS_PER_YEAR) / Decimal::from(span_secs)))
}

pub fn annualize_backtest_revenue(report: &BacktestReport) -> Result<Decimal> {
    annualize_revenue(report.realized_profit, report.span_secs)
}

/// Linear capacity scaling of a revenue earned by a `from` battery.
pub fn scale_to_capacity(revenue: Decimal, from: Energy, to: Energy) -> Result<Decimal> {
    if !from.is_positive() {
        return Err(EconError::InvalidScenario("reference capacity must be positive".into()));
    }
    Ok(cents(revenue * to.mwh() / from.mwh()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatteryCatalogEntry {
    pub name: String,
    pub capacity_mwh: Decimal,
    /// Hours for a full charge or discharge.
    pub cycle_hours: u32,
    pub capex: Decimal,
    pub base_maintenance: Decimal,
    pub charge_efficiency: Decimal,
    pub discharge_efficiency: Decimal,
    /// Published cumulative curve in EUR millions, year 0 first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub figure_cumulative_eur_m: Vec<Decimal>,
}

impl BatteryCatalogEntry {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(EconError::Catalog(format!("{}: {m}", self.name)));
        if self.name.trim().is_empty() {
            return bad("empty name".into());
        }
        if self.capacity_mwh <= Decimal::ZERO {
            return bad("capacity must be positive".into());
        }
        if self.cycle_hours == 0 {
            return bad("cycle_hours must be positive".into());
        }
        self.scenario(Decimal::ZERO).map_err(|e| EconError::Catalog(format!("{}: {e}", self.name)))?;
        self.battery_spec()?;
        Ok(())
    }

    /// Empty at the floor, ramp of one full cycle per `cycle_hours` periods.
    pub fn battery_spec(&self) -> Result<BatterySpec> {
        let capacity = Energy::from_decimal(self.capacity_mwh);
        let ramp = Energy::from_decimal(self.capacity_mwh / Decimal::from(self.cycle_hours));
        Ok(BatterySpec::new(
            capacity,
            ramp,
            Energy::ZERO,
            self.charge_efficiency,
            self.discharge_efficiency,
        )?)
    }

    pub fn scenario(&self, g: Decimal) -> Result<EconScenario> {
        EconScenario::new(self.capex, self.base_maintenance, g)
    }

    /// Published curve in EUR.
    pub fn figure_series(&self) -> Vec<Decimal> {
        let million = Decimal::from(1_000_000);
        self.figure_cumulative_eur_m.iter().map(|x| x * million).collect()
    }

    /// Base revenue implied by the published year-1 point, starting from the
    /// exact construction cost.
    pub fn figure_implied_revenue(&self) -> Option<Decimal> {
        let fig = self.figure_series();
        let s = self.scenario(Decimal::ZERO).ok()?;
        fig.get(1).map(|y1| cents(implied_base_revenue(-self.capex, *y1, &s)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatteryCatalog {
    pub batteries: Vec<BatteryCatalogEntry>,
}

impl BatteryCatalog {
    /// The four reference batteries with their published curves.
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_CATALOG).expect("builtin catalog is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: BatteryCatalog = serde_json::from_str(text).map_err(|e| EconError::Catalog(e.to_string()))?;
        let mut names = BTreeSet::new();
        for b in &c.batteries {
            b.validate()?;
            if !names.insert(b.name.as_str()) {
                return Err(EconError::Catalog(format!("duplicate battery `{}`", b.name)));
            }
        }
        Ok(c)
    }

    pub fn get(&self, name: &str) -> Option<&BatteryCatalogEntry> {
        self.batteries.iter().find(|b| b.name == name)
    }

    /// Adds `entry`, replacing any entry of the same name.
    pub fn upsert(&mut self, entry: BatteryCatalogEntry) -> Result<()> {
        entry.validate()?;
        match self.batteries.iter_mut().find(|b| b.name == entry.name) {
            Some(b) => *b = entry,
            None => self.batteries.push(entry),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EconSummary {
    pub battery: String,
    pub gross_revenue_base: Decimal,
    pub degradation_mode: RateMode,
    pub escalation_mode: RateMode,
    pub breakeven_year: Option<u32>,
    pub final_cumulative: Decimal,
}

impl EconSummary {
    pub fn new(battery: &str, s: &EconScenario, curve: &ReturnCurve) -> Self {
        EconSummary {
            battery: battery.to_string(),
            gross_revenue_base: cents(s.gross_revenue_base),
            degradation_mode: s.degradation_mode,
            escalation_mode: s.escalation_mode,
            breakeven_year: curve.breakeven,
            final_cumulative: curve.cumulative.last().copied().unwrap_or_default(),
        }
    }
}

/// `year,cumulative_eur`, one row per curve point.
pub fn write_curve_csv<W: Write>(out: W, curve: &ReturnCurve) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["year", "cumulative_eur"])?;
    for (y, c) in curve.cumulative.iter().enumerate() {
        w.write_record([y.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
