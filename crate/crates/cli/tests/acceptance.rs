//! Acceptance suite. Every criterion runs to completion and prints one
//! `PASS` or `FAIL` line; the process exits non-zero if any failed.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use bessarb::battery::{BatterySpec, BatteryState, Energy};
use bessarb::economics::{annual_return_curve, breakeven_year, implied_base_revenue, BatteryCatalog};
use bessarb::evaluation::{
    cents, dp_optimal, dp_optimal_dual, perfect_foresight, perfect_foresight_dual, pinball, pinball_loss, run_sweep,
    settle, settle_dual, Dataset, SweepOptions,
};
use bessarb::market_data::{
    build_dual_horizon, generate_synthetic, generate_synthetic_dual, MarketKind, PriceSeries, QuantileForecast,
    TradingWindow, DEFAULT_LEVELS, SYNTHETIC_EPOCH,
};
use bessarb::strategies::{bottleneck_execute, reference_pairs, ts1, ts2, ts3_dual, CandidatePair, Side, Strategy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;
use rust_decimal_macros::dec;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

fn mwh(x: i64) -> Energy {
    Energy::from_milli(x * 1000)
}

/// Batteries whose ramp divides the swing, so the optimum is always defined.
fn batteries() -> Vec<BatterySpec> {
    vec![
        BatterySpec::reference(),
        BatterySpec::new(mwh(2), mwh(1), Energy::ZERO, dec!(0.95), dec!(0.95)).unwrap(),
    ]
}

fn economics() -> Outcome {
    let started = Instant::now();
    let catalog = BatteryCatalog::builtin();
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, expected) in [("A", 12), ("B", 11), ("D", 7)] {
        let b = catalog.get(name).unwrap();
        let figure = b.figure_series();
        let probe = b.scenario(Decimal::ZERO).unwrap();
        let g = implied_base_revenue(figure[0], figure[1], &probe);
        let curve = annual_return_curve(&b.scenario(g).unwrap());
        let worst = curve.cumulative.iter().zip(&figure).map(|(c, f)| (c - f).abs()).max().unwrap();
        let breakeven = breakeven_year(&curve);
        let ok = figure.len() == 16 && worst <= dec!(1500) && breakeven == Some(expected);
        pass &= ok;
        notes.push(format!("{name}: max err {} breakeven {breakeven:?} (want {expected})", worst.round_dp(0)));
    }
    // C has no consistent recurrence; only its shipped series is checked.
    let c = catalog.get("C").unwrap();
    let series = c.figure_series();
    let c_ok = series.len() == 16 && (series[0] + c.capex).abs() < Decimal::ONE;
    pass &= c_ok;
    notes.push(format!("C: shipped series of {} points, year 0 = -capex: {c_ok}", series.len()));
    let elapsed = started.elapsed();
    pass &= elapsed < Duration::from_secs(1);
    notes.push(format!("{elapsed:.2?}"));
    Outcome::new(pass, notes.join("; "))
}

fn bottleneck() -> Outcome {
    let spec = BatterySpec::reference();
    let cand = |buy_period, sell_period| CandidatePair {
        buy_period,
        sell_period,
        buy_price: dec!(10),
        sell_price: dec!(50),
        expected_spread: dec!(50) * dec!(0.8) - dec!(10) / dec!(0.98),
    };
    let empty = BatteryState::new(Energy::ZERO);
    let mut failures = Vec::new();

    let a = bottleneck_execute(&cand(2, 5), empty, &spec);
    let (buy, sell) = (a.buy.unwrap(), a.sell.unwrap());
    // 50 * 0.8 - 10 / 0.98 = 40 - 10.2040816...
    if !(buy.period == 2 && buy.volume == mwh(1) && sell.period == 5 && sell.volume == mwh(1))
        || a.cash.round_dp(3) != dec!(29.796)
        || a.state.charge != Energy::ZERO
    {
        failures.push(format!("buy-first: {a:?}"));
    }

    let b = bottleneck_execute(&cand(5, 2), empty, &spec);
    if b.sell.is_some() || b.buy.map(|o| (o.period, o.volume, o.side)) != Some((5, mwh(1), Side::Buy)) || b.state.charge != mwh(1) {
        failures.push(format!("sell-first from empty: {b:?}"));
    }

    let full = BatteryState::new(mwh(1));
    let c = bottleneck_execute(&cand(1, 3), full, &spec);
    if c.buy.is_some() || c.sell.map(|o| (o.period, o.volume)) != Some((3, mwh(1))) || c.state.charge != Energy::ZERO {
        failures.push(format!("buy-first from full: {c:?}"));
    }

    Outcome::new(failures.is_empty(), if failures.is_empty() { "3 traces exact".to_string() } else { failures.join("; ") })
}

/// Counts every replay violation seen while criteria 3 and 4 run.
#[derive(Default)]
struct Replays {
    checked: usize,
    violations: Vec<String>,
}

impl Replays {
    fn record(&mut self, what: String, result: Result<BatteryState, impl std::fmt::Display>) {
        self.checked += 1;
        if let Err(e) = result {
            self.violations.push(format!("{what}: {e}"));
        }
    }
}

fn dominance(replays: &mut Replays) -> Outcome {
    let started = Instant::now();
    let mut windows = 0;
    let mut comparisons = 0;
    let mut violations = Vec::new();
    let mut data: Vec<(PriceSeries, QuantileForecast)> = Vec::new();
    for seed in 0..4 {
        let (a, f) = generate_synthetic(100 + seed, MarketKind::Dam, 150, 4.0 + 4.0 * seed as f64);
        data.extend(a.into_iter().zip(f));
        let (a, f) = generate_synthetic(200 + seed, MarketKind::Bm, 35, 4.0 + 4.0 * seed as f64);
        data.extend(a.into_iter().zip(f));
    }
    for (a, f) in &data {
        windows += 1;
        for spec in batteries() {
            for strategy in Strategy::ALL {
                let eff = strategy.effective_spec(&spec);
                let dp = dp_optimal(a, &eff).unwrap();
                for pair in reference_pairs() {
                    let s = strategy.run(f, pair, &spec, Default::default()).unwrap();
                    replays.record(format!("{strategy} {pair} {}", a.window.start), s.replay(&eff));
                    let realized = settle(&s, a, &spec).unwrap();
                    comparisons += 1;
                    if realized > dp {
                        violations.push(format!("{strategy} {pair} at {}: {realized} > {dp}", a.window.start));
                    }
                }
            }
        }
    }
    let d = generate_synthetic_dual(300, 60, 8.0);
    for i in 0..d.dam_actuals.len() {
        windows += 1;
        let horizon = build_dual_horizon(d.dam_forecasts[i].clone(), d.bm_forecasts[i].clone()).unwrap();
        for spec in batteries() {
            let dp = dp_optimal_dual(&d.dam_actuals[i], &d.bm_actuals[i], &spec).unwrap();
            for pair in reference_pairs() {
                let s = ts3_dual(&horizon, pair, &spec).unwrap();
                replays.record(format!("dual {pair} day {i}"), s.replay(&spec));
                let realized = settle_dual(&s, &d.dam_actuals[i], &d.bm_actuals[i], &spec).unwrap();
                comparisons += 1;
                if realized > dp {
                    violations.push(format!("dual {pair} day {i}: {realized} > {dp}"));
                }
            }
        }
    }
    let elapsed = started.elapsed();
    let pass = windows >= 1000 && violations.is_empty() && elapsed < Duration::from_secs(30);
    let mut detail = format!("{windows} windows, {comparisons} comparisons, {} violations, {elapsed:.2?}", violations.len());
    if let Some(v) = violations.first() {
        detail.push_str(&format!("; first: {v}"));
    }
    Outcome::new(pass, detail)
}

fn zero_noise(replays: &mut Replays) -> Outcome {
    let spec = BatterySpec::reference();
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for market in [MarketKind::Dam, MarketKind::Bm] {
        let (actuals, forecasts) = generate_synthetic(7, market, 40, 0.0);
        for (a, f) in actuals.iter().zip(&forecasts) {
            for strategy in Strategy::ALL {
                let pf = cents(perfect_foresight(a, strategy, &spec).unwrap());
                for pair in reference_pairs() {
                    let s = strategy.run(f, pair, &spec, Default::default()).unwrap();
                    replays.record(format!("{strategy} {pair} {}", a.window.start), s.replay(&strategy.effective_spec(&spec)));
                    let realized = cents(settle(&s, a, &spec).unwrap());
                    checked += 1;
                    if realized != pf {
                        mismatches.push(format!("{market} {strategy} {pair} {}: {realized} != {pf}", a.window.start));
                    }
                }
            }
        }
    }
    let d = generate_synthetic_dual(7, 40, 0.0);
    for i in 0..d.dam_actuals.len() {
        let horizon = build_dual_horizon(d.dam_forecasts[i].clone(), d.bm_forecasts[i].clone()).unwrap();
        let pf = cents(perfect_foresight_dual(&d.dam_actuals[i], &d.bm_actuals[i], &spec).unwrap());
        for pair in reference_pairs() {
            let s = ts3_dual(&horizon, pair, &spec).unwrap();
            replays.record(format!("dual {pair} day {i}"), s.replay(&spec));
            let realized = cents(settle_dual(&s, &d.dam_actuals[i], &d.bm_actuals[i], &spec).unwrap());
            checked += 1;
            if realized != pf {
                mismatches.push(format!("dual {pair} day {i}: {realized} != {pf}"));
            }
        }
    }
    let mut detail = format!("{checked} (window, strategy, pair) cells, {} mismatches", mismatches.len());
    if let Some(m) = mismatches.first() {
        detail.push_str(&format!("; first: {m}"));
    }
    Outcome::new(mismatches.is_empty(), detail)
}

fn replay_safety(replays: &Replays) -> Outcome {
    let mut detail = format!("{} schedules replayed, {} violations", replays.checked, replays.violations.len());
    if let Some(v) = replays.violations.first() {
        detail.push_str(&format!("; first: {v}"));
    }
    Outcome::new(replays.checked > 0 && replays.violations.is_empty(), detail)
}

fn decreasing_no_trade() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let spec = BatterySpec::reference();
    let mut traded = Vec::new();
    for i in 0..100 {
        let market = if i % 2 == 0 { MarketKind::Dam } else { MarketKind::Bm };
        let window = TradingWindow::standard(market, SYNTHETIC_EPOCH);
        // positive prices: below zero, efficiency losses make a falling curve profitable
        let mut price = Decimal::new(rng.gen_range(80_000..150_000), 2);
        let mut rows = Vec::new();
        for _ in 0..window.period_count {
            let spread = Decimal::new(rng.gen_range(0..200), 2);
            // levels rise across a row by under 8; each step falls by more than 8
            rows.push((0..DEFAULT_LEVELS.len()).map(|j| price + spread * Decimal::from(j)).collect());
            price -= Decimal::new(rng.gen_range(801..3_000), 2);
        }
        let f = QuantileForecast::new(window, DEFAULT_LEVELS.to_vec(), rows).unwrap();
        for pair in reference_pairs() {
            if !ts1(&f, pair, &spec).unwrap().is_empty() {
                traded.push(format!("TS1 instance {i} {pair}"));
            }
            if !ts2(&f, pair, &spec).unwrap().is_empty() {
                traded.push(format!("TS2 instance {i} {pair}"));
            }
        }
    }
    Outcome::new(traded.is_empty(), format!("100 instances x 7 pairs, {} non-empty schedules", traded.len()))
}

fn pinball_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut bad = 0;
    for _ in 0..10_000 {
        let y = Decimal::new(rng.gen_range(-50_000..100_000), 2);
        let f = Decimal::new(rng.gen_range(-50_000..100_000), 2);
        if pinball_loss(dec!(0.5), y, f) != (y - f).abs() / dec!(2) {
            bad += 1;
        }
    }
    let (actuals, _) = generate_synthetic(8, MarketKind::Dam, 5, 0.0);
    let mut nonzero = 0;
    for a in &actuals {
        let report = pinball(&QuantileForecast::degenerate(a, &DEFAULT_LEVELS).unwrap(), a).unwrap();
        nonzero += report.per_level.iter().filter(|l| !l.mean_loss.is_zero()).count();
        nonzero += usize::from(!report.aggregate.is_zero());
    }
    Outcome::new(
        bad == 0 && nonzero == 0,
        format!("median identity broken on {bad} of 10000 pairs; {nonzero} non-zero scores for perfect forecasts"),
    )
}

fn profit_arithmetic() -> Outcome {
    let spec = BatterySpec::reference();
    let window = TradingWindow::new(MarketKind::Dam, SYNTHETIC_EPOCH, 2).unwrap();
    let actuals = PriceSeries::new(window, vec![dec!(10), dec!(50)]).unwrap();
    let f = QuantileForecast::degenerate(&actuals, &DEFAULT_LEVELS).unwrap();
    let s = ts1(&f, reference_pairs()[0], &spec).unwrap();
    let cash = settle(&s, &actuals, &spec).unwrap();
    Outcome::new(
        s.trade_count() == 2 && cash.round_dp(5) == dec!(29.79592),
        format!("{} orders, settled {cash}", s.trade_count()),
    )
}

fn bessarb(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_bessarb")).args(args).output().expect("binary runs");
    assert!(out.status.success(), "bessarb {args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn reproducibility(root: &Path) -> Outcome {
    let dir = |name: &str| root.join(name).to_string_lossy().into_owned();
    bessarb(&["gen", "--out", &dir("dam"), "--market", "dam", "--days", "20", "--seed", "3"]);
    bessarb(&["gen", "--out", &dir("bm"), "--market", "bm", "--days", "10", "--seed", "4"]);
    bessarb(&["gen", "--out", &dir("dual"), "--market", "dual", "--days", "10", "--seed", "5"]);
    let datasets = [format!("dam:m:{}", dir("dam")), format!("bm:m:{}", dir("bm")), format!("dual:m:{}", dir("dual"))];
    let mut runs = Vec::new();
    for jobs in ["1", "8"] {
        let out = dir(&format!("sweep_{jobs}"));
        let mut args = vec!["sweep", "--out", &out, "--jobs", jobs];
        for d in &datasets {
            args.extend(["--dataset", d.as_str()]);
        }
        bessarb(&args);
        runs.push(read_dir(Path::new(&out)));
    }
    let names: Vec<&String> = runs[0].keys().collect();
    Outcome::new(
        runs[0] == runs[1] && names.len() == 4,
        format!("files {names:?} identical: {}", runs[0] == runs[1]),
    )
}

fn table_layout_and_pf(root: &Path) -> Outcome {
    let mut notes = Vec::new();
    let text = fs::read_to_string(root.join("sweep_1").join("sweep_table.csv")).unwrap();
    let header = text.lines().next().unwrap_or_default();
    let mut want = vec!["market".to_string(), "model".into(), "strategy".into()];
    want.extend(reference_pairs().iter().map(|p| p.label()));
    want.extend(["PF".into(), "Model Average".into()]);
    let layout = header == want.join(",")
        && ["DAM", "BM", "DUAL"].iter().all(|m| text.lines().any(|l| l.starts_with(&format!("{m},Average,"))));
    notes.push(format!("layout {}", if layout { "matches" } else { "differs" }));

    let mut datasets = Vec::new();
    for (seed, noise) in [(21, 3.0), (22, 10.0), (23, 25.0)] {
        let model = format!("noise{noise}");
        let (a, f) = generate_synthetic(seed, MarketKind::Dam, 30, noise);
        datasets.push(Dataset::single(&model, a, f).unwrap());
        let (a, f) = generate_synthetic(seed, MarketKind::Bm, 10, noise);
        datasets.push(Dataset::single(&model, a, f).unwrap());
        let d = generate_synthetic_dual(seed, 30, noise);
        datasets.push(Dataset::dual(&model, d.dam_actuals, d.dam_forecasts, d.bm_actuals, d.bm_forecasts).unwrap());
    }
    let report = run_sweep(&datasets, &SweepOptions::new(Strategy::ALL.to_vec(), reference_pairs(), BatterySpec::reference())).unwrap();
    let mut by_group: BTreeMap<String, (usize, usize, Decimal)> = BTreeMap::new();
    for c in &report.cells {
        let entry = by_group.entry(format!("{} {}", c.market, c.strategy)).or_insert((0, 0, Decimal::ZERO));
        entry.0 += 1;
        if c.realized_profit > c.pf_profit {
            entry.1 += 1;
            entry.2 = entry.2.max(c.realized_profit - c.pf_profit);
        }
    }
    let above: usize = by_group.values().map(|g| g.1).sum();
    for (group, (cells, over, excess)) in &by_group {
        if *over > 0 {
            notes.push(format!("{group}: {over}/{cells} cells above PF (max excess {excess})"));
        }
    }
    notes.push(format!("{above} of {} cells above PF", report.cells.len()));
    Outcome::new(layout && above == 0, notes.join("; "))
}

fn main() {
    let root = tempfile::tempdir().unwrap();
    let mut replays = Replays::default();
    let criteria: Vec<(&str, Outcome)> = vec![
        ("1 economics figure regression", economics()),
        ("2 bottleneck traces", bottleneck()),
        ("3 optimum dominance", dominance(&mut replays)),
        ("4 zero-noise collapse", zero_noise(&mut replays)),
        ("5 replay safety", replay_safety(&replays)),
        ("6 decreasing forecasts do not trade", decreasing_no_trade()),
        ("7 pinball identities", pinball_identities()),
        ("8 profit arithmetic", profit_arithmetic()),
        ("9 sweep reproducibility", reproducibility(root.path())),
        ("10 table layout and PF bound", table_layout_and_pf(root.path())),
    ];
    let mut failed = 0;
    for (name, o) in &criteria {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
