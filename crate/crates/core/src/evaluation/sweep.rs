use rayon::prelude::*;
use rust_decimal::Decimal;
use serde::Serialize;

use super::{
    cents, degenerate, dp_optimal, dp_optimal_dual, settle, settle_dual, EvaluationError, ReportMarket, Result,
};
use crate::battery::{BatterySpec, BatteryState};
use crate::market_data::{build_dual_horizon, format_timestamp, DualHorizon, MarketKind, PriceSeries, QuantileForecast};
use crate::strategies::{ts3_dual_with, PairRule, QuantilePair, Strategy};

/// Actual prices and forecasts of one model over consecutive windows.
#[derive(Debug, Clone)]
pub enum Dataset {
    Single {
        model: String,
        actuals: Vec<PriceSeries>,
        forecasts: Vec<QuantileForecast>,
    },
    Dual {
        model: String,
        dam_actuals: Vec<PriceSeries>,
        bm_actuals: Vec<PriceSeries>,
        horizons: Vec<DualHorizon>,
    },
}

impl Dataset {
    /// Pairs forecasts with actuals window by window.
    pub fn single(model: impl Into<String>, actuals: Vec<PriceSeries>, forecasts: Vec<QuantileForecast>) -> Result<Self> {
        check_aligned(&actuals, &forecasts)?;
        Ok(Dataset::Single {
            model: model.into(),
            actuals,
            forecasts,
        })
    }

    /// Pairs every DAM day with the BM window opening at the same instant.
    /// BM windows that open at other times are not used.
    pub fn dual(
        model: impl Into<String>,
        dam_actuals: Vec<PriceSeries>,
        dam_forecasts: Vec<QuantileForecast>,
        bm_actuals: Vec<PriceSeries>,
        bm_forecasts: Vec<QuantileForecast>,
    ) -> Result<Self> {
        check_aligned(&dam_actuals, &dam_forecasts)?;
        check_aligned(&bm_actuals, &bm_forecasts)?;
        let mut out_dam = Vec::with_capacity(dam_actuals.len());
        let mut out_bm = Vec::with_capacity(dam_actuals.len());
        let mut horizons = Vec::with_capacity(dam_actuals.len());
        for (a, f) in dam_actuals.into_iter().zip(dam_forecasts) {
            let Some(j) = bm_actuals.iter().position(|b| b.window.start == a.window.start) else {
                return Err(EvaluationError::WindowMismatch(format!(
                    "no BM window opens with the DAM day starting {}",
                    format_timestamp(a.window.start)
                )));
            };
            horizons.push(build_dual_horizon(f, bm_forecasts[j].clone())?);
            out_bm.push(bm_actuals[j].clone());
            out_dam.push(a);
        }
        Ok(Dataset::Dual {
            model: model.into(),
            dam_actuals: out_dam,
            bm_actuals: out_bm,
            horizons,
        })
    }

    pub fn model(&self) -> &str {
        match self {
            Dataset::Single { model, .. } | Dataset::Dual { model, .. } => model,
        }
    }

    pub fn market(&self) -> ReportMarket {
        match self {
            Dataset::Single { actuals, .. } => match actuals[0].window.market {
                MarketKind::Dam => ReportMarket::Dam,
                MarketKind::Bm => ReportMarket::Bm,
            },
            Dataset::Dual { .. } => ReportMarket::Dual,
        }
    }

    pub fn windows(&self) -> usize {
        match self {
            Dataset::Single { actuals, .. } => actuals.len(),
            Dataset::Dual { dam_actuals, .. } => dam_actuals.len(),
        }
    }

    /// Seconds from the first window's start to the last window's end.
    pub fn span_secs(&self) -> i64 {
        let series = match self {
            Dataset::Single { actuals, .. } => actuals,
            Dataset::Dual { dam_actuals, .. } => dam_actuals,
        };
        series.last().map_or(0, |l| l.window.end()) - series.first().map_or(0, |f| f.window.start)
    }
}

fn check_aligned(actuals: &[PriceSeries], forecasts: &[QuantileForecast]) -> Result<()> {
    if actuals.is_empty() {
        return Err(EvaluationError::InvalidSweep("dataset has no windows".into()));
    }
    if actuals.len() != forecasts.len() {
        return Err(EvaluationError::WindowMismatch(format!(
            "{} actual windows against {} forecast windows",
            actuals.len(),
            forecasts.len()
        )));
    }
    let market = actuals[0].window.market;
    for (a, f) in actuals.iter().zip(forecasts) {
        if a.window != f.window || a.window.market != market {
            return Err(EvaluationError::WindowMismatch(format!(
                "forecast window starting {} does not match actuals starting {}",
                format_timestamp(f.window.start),
                format_timestamp(a.window.start)
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub strategies: Vec<Strategy>,
    pub pairs: Vec<QuantilePair>,
    pub spec: BatterySpec,
    pub rule: PairRule,
    /// Start each window from the previous window's final charge instead of
    /// the spec's initial charge.
    pub carry_state: bool,
    /// Worker threads; 0 lets the pool decide.
    pub jobs: usize,
}

impl SweepOptions {
    pub fn new(strategies: Vec<Strategy>, pairs: Vec<QuantilePair>, spec: BatterySpec) -> Self {
        SweepOptions {
            strategies,
            pairs,
            spec,
            rule: PairRule::Conservative,
            carry_state: false,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowResult {
    pub window_start: String,
    pub realized_profit: Decimal,
    pub pf_profit: Decimal,
    pub dp_profit: Option<Decimal>,
    pub trade_count: usize,
}

/// One (dataset, strategy, pair) cell. Money is in EUR, rounded to cents
/// after summing the exact per-window amounts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BacktestReport {
    pub market: ReportMarket,
    pub model: String,
    pub strategy: Strategy,
    pub pair: QuantilePair,
    pub realized_profit: Decimal,
    pub trade_count: usize,
    pub pf_profit: Decimal,
    /// Absent when the battery's ramp does not divide its swing.
    pub dp_profit: Option<Decimal>,
    pub windows: usize,
    pub span_secs: i64,
    pub per_window: Vec<WindowResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SweepReport {
    pub spec_digest: String,
    pub pair_rule: PairRule,
    pub carry_state: bool,
    pub cells: Vec<BacktestReport>,
}

struct Totals {
    realized: Decimal,
    pf: Decimal,
    dp: Option<Decimal>,
    trades: usize,
    rows: Vec<WindowResult>,
}

impl Totals {
    fn new(n: usize) -> Self {
        Totals {
            realized: Decimal::ZERO,
            pf: Decimal::ZERO,
            dp: Some(Decimal::ZERO),
            trades: 0,
            rows: Vec::with_capacity(n),
        }
    }

    fn add(&mut self, start: i64, realized: Decimal, pf: Decimal, dp: Option<Decimal>, trades: usize) {
        self.realized += realized;
        self.pf += pf;
        self.dp = self.dp.zip(dp).map(|(a, b)| a + b);
        self.trades += trades;
        self.rows.push(WindowResult {
            window_start: format_timestamp(start),
            realized_profit: cents(realized),
            pf_profit: cents(pf),
            dp_profit: dp.map(cents),
            trade_count: trades,
        });
    }
}

fn start_spec(spec: &BatterySpec, carry: bool, state: BatteryState) -> Result<BatterySpec> {
    if carry {
        Ok(spec.clone().with_initial_charge(state.charge).map_err(|e| EvaluationError::InvalidSweep(e.to_string()))?)
    } else {
        Ok(spec.clone())
    }
}

fn single_cell(
    actuals: &[PriceSeries],
    forecasts: &[QuantileForecast],
    strategy: Strategy,
    pair: QuantilePair,
    opts: &SweepOptions,
) -> Result<Totals> {
    let mut totals = Totals::new(actuals.len());
    let mut state = opts.spec.initial_state();
    let mut pf_state = state;
    for (a, f) in actuals.iter().zip(forecasts) {
        let spec = start_spec(&opts.spec, opts.carry_state, state)?;
        let schedule = strategy.run(f, pair, &spec, opts.rule)?;
        let eff = strategy.effective_spec(&spec);
        state = schedule.replay(&eff)?;
        let realized = settle(&schedule, a, &spec)?;

        let pf_spec = start_spec(&opts.spec, opts.carry_state, pf_state)?;
        let pf_schedule = strategy.run(&degenerate(a)?, QuantilePair::median(), &pf_spec, PairRule::Conservative)?;
        pf_state = pf_schedule.replay(&strategy.effective_spec(&pf_spec))?;
        let pf = settle(&pf_schedule, a, &pf_spec)?;

        let dp = dp_optimal(a, &eff).ok();
        totals.add(a.window.start, realized, pf, dp, schedule.trade_count());
    }
    Ok(totals)
}

fn dual_cell(
    dam_actuals: &[PriceSeries],
    bm_actuals: &[PriceSeries],
    horizons: &[DualHorizon],
    pair: QuantilePair,
    opts: &SweepOptions,
) -> Result<Totals> {
    let mut totals = Totals::new(horizons.len());
    let mut state = opts.spec.initial_state();
    let mut pf_state = state;
    for ((da, ba), h) in dam_actuals.iter().zip(bm_actuals).zip(horizons) {
        let spec = start_spec(&opts.spec, opts.carry_state, state)?;
        let schedule = ts3_dual_with(h, pair, &spec, opts.rule)?;
        state = schedule.replay(&spec)?;
        let realized = settle_dual(&schedule, da, ba, &spec)?;

        let pf_spec = start_spec(&opts.spec, opts.carry_state, pf_state)?;
        let pf_schedule = ts3_dual_with(&super::degenerate_dual(da, ba)?, QuantilePair::median(), &pf_spec, PairRule::Conservative)?;
        pf_state = pf_schedule.replay(&pf_spec)?;
        let pf = settle_dual(&pf_schedule, da, ba, &pf_spec)?;

        let dp = dp_optimal_dual(da, ba, &spec).ok();
        totals.add(da.window.start, realized, pf, dp, schedule.trade_count());
    }
    Ok(totals)
}

/// Every (dataset, strategy, pair) cell, in dataset, strategy, pair order.
/// Dual datasets run TS3-Dual only, reported under TS3. The output does not
/// depend on the number of worker threads.
pub fn run_sweep(datasets: &[Dataset], opts: &SweepOptions) -> Result<SweepReport> {
    if datasets.is_empty() {
        return Err(EvaluationError::InvalidSweep("no datasets".into()));
    }
    if opts.strategies.is_empty() {
        return Err(EvaluationError::InvalidSweep("no strategies".into()));
    }
    if opts.pairs.is_empty() {
        return Err(EvaluationError::InvalidSweep("no quantile pairs".into()));
    }
    let mut jobs = Vec::new();
    for d in datasets {
        let strategies: &[Strategy] = match d {
            Dataset::Single { .. } => &opts.strategies,
            Dataset::Dual { .. } => &[Strategy::Ts3],
        };
        for s in strategies {
            for p in &opts.pairs {
                jobs.push((d, *s, *p));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| EvaluationError::InvalidSweep(e.to_string()))?;
    let cells = pool.install(|| {
        jobs.par_iter()
            .map(|(d, strategy, pair)| {
                let totals = match d {
                    Dataset::Single { actuals, forecasts, .. } => single_cell(actuals, forecasts, *strategy, *pair, opts)?,
                    Dataset::Dual {
                        dam_actuals,
                        bm_actuals,
                        horizons,
                        ..
                    } => dual_cell(dam_actuals, bm_actuals, horizons, *pair, opts)?,
                };
                Ok(BacktestReport {
                    market: d.market(),
                    model: d.model().to_string(),
                    strategy: *strategy,
                    pair: *pair,
                    realized_profit: cents(totals.realized),
                    trade_count: totals.trades,
                    pf_profit: cents(totals.pf),
                    dp_profit: totals.dp.map(cents),
                    windows: d.windows(),
                    span_secs: d.span_secs(),
                    per_window: totals.rows,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SweepReport {
        spec_digest: opts.spec.digest(),
        pair_rule: opts.rule,
        carry_state: opts.carry_state,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::generate_synthetic;
    use crate::strategies::reference_pairs;

    #[test]
    fn degenerate_forecasts_collapse_pairs() {
        let (actuals, _) = generate_synthetic(5, MarketKind::Dam, 3, 0.0);
        let forecasts = actuals
            .iter()
            .map(|a| QuantileForecast::degenerate(a, &crate::market_data::DEFAULT_LEVELS).unwrap())
            .collect();
        let ds = Dataset::single("oracle", actuals, forecasts).unwrap();
        let opts = SweepOptions::new(Strategy::ALL.to_vec(), reference_pairs(), BatterySpec::reference());
        let report = run_sweep(&[ds], &opts).unwrap();
        assert_eq!(report.cells.len(), 21);
        for c in &report.cells {
            assert_eq!(c.realized_profit, c.pf_profit);
            assert!(c.pf_profit <= c.dp_profit.unwrap());
            assert_eq!(c.per_window.len(), 3);
        }
    }

    #[test]
    fn counting_and_validation() {
        let (a, f) = generate_synthetic(1, MarketKind::Bm, 1, 3.0);
        let ds = Dataset::single("m", a, f).unwrap();
        let pairs = reference_pairs()[..2].to_vec();
        let report = run_sweep(&[ds.clone()], &SweepOptions::new(vec![Strategy::Ts3], pairs.clone(), BatterySpec::reference())).unwrap();
        assert_eq!(report.cells.len(), 2);
        assert_eq!(report.cells[0].windows, 3);
        let empty = SweepOptions::new(vec![], pairs, BatterySpec::reference());
        assert!(matches!(run_sweep(&[ds], &empty), Err(EvaluationError::InvalidSweep(_))));
    }
}
