//! Seeded synthetic price and forecast instances.
//!
//! Actual prices follow a double-peak daily profile (morning and evening)
//! with a random day level and per-period noise; BM prices are far noisier
//! than DAM prices and go negative now and then. A forecast at level `q` is
//! `actual + noise_sd * z_q + bias_t`, where `z_q` is the standard normal
//! quantile and `bias_t` a per-period draw shared by all levels, so levels
//! never cross.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rust_decimal::prelude::FromPrimitive;
use rust_decimal::Decimal;
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use super::{MarketKind, PriceSeries, QuantileForecast, TradingWindow};

/// 2024-01-01T00:00:00Z
pub const SYNTHETIC_EPOCH: i64 = 1_704_067_200;

pub const DEFAULT_LEVELS: [Decimal; 5] = [
    Decimal::from_parts(1, 0, 0, false, 1),
    Decimal::from_parts(3, 0, 0, false, 1),
    Decimal::from_parts(5, 0, 0, false, 1),
    Decimal::from_parts(7, 0, 0, false, 1),
    Decimal::from_parts(9, 0, 0, false, 1),
];

const DAY_SECS: i64 = 86_400;

fn daily_profile(hour: f64) -> f64 {
    let bump = |centre: f64, width: f64| (-((hour - centre) / width).powi(2)).exp();
    55.0 + 30.0 * bump(8.0, 1.8) + 45.0 * bump(18.5, 2.2) - 12.0 * bump(3.5, 2.5)
}

fn cents(x: f64) -> Decimal {
    Decimal::from_f64(x).unwrap_or_default().round_dp(2)
}

struct PriceModel {
    rng: ChaCha8Rng,
}

impl PriceModel {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        PriceModel { rng }
    }

    fn day_level(&mut self) -> f64 {
        Normal::new(0.0, 8.0).expect("valid sd").sample(&mut self.rng)
    }

    fn price(&mut self, market: MarketKind, hour: f64, day_level: f64) -> Decimal {
        let base = daily_profile(hour) + day_level;
        let x = match market {
            MarketKind::Dam => base + Normal::new(0.0, 6.0).expect("valid sd").sample(&mut self.rng),
            MarketKind::Bm => {
                let mut x = base + Normal::new(0.0, 28.0).expect("valid sd").sample(&mut self.rng);
                if self.rng.gen_bool(0.04) {
                    x -= 90.0;
                }
                x
            }
        };
        cents(x)
    }
}

struct ForecastModel {
    rng: ChaCha8Rng,
    z: Vec<f64>,
    noise_sd: f64,
}

impl ForecastModel {
    fn new(seed: u64, levels: &[Decimal], noise_sd: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let std = StdNormal::new(0.0, 1.0).expect("standard normal");
        let z = levels
            .iter()
            .map(|l| std.inverse_cdf(l.to_string().parse::<f64>().expect("level parses")))
            .collect();
        ForecastModel { rng, z, noise_sd }
    }

    fn forecast(&mut self, actuals: &PriceSeries, levels: &[Decimal]) -> QuantileForecast {
        let rows = actuals
            .prices
            .iter()
            .map(|p| {
                let bias = if self.noise_sd > 0.0 {
                    Normal::new(0.0, self.noise_sd).expect("valid sd").sample(&mut self.rng)
                } else {
                    0.0
                };
                self.z.iter().map(|z| *p + cents(self.noise_sd * z + bias)).collect()
            })
            .collect();
        QuantileForecast::new(actuals.window, levels.to_vec(), rows).expect("synthetic forecast is well formed")
    }
}

fn window_series(model: &mut PriceModel, window: TradingWindow, day_start: i64, day_level: f64) -> PriceSeries {
    let prices = (0..window.period_count)
        .map(|i| {
            let hour = (window.timestamp(i) - day_start) as f64 / 3600.0;
            model.price(window.market, hour % 24.0, day_level)
        })
        .collect();
    PriceSeries::new(window, prices).expect("length matches window")
}

/// `days` of actual prices and matching forecasts at [`DEFAULT_LEVELS`].
/// DAM: one 24-period window per day. BM: three consecutive 16-period
/// windows per day.
pub fn generate_synthetic(
    seed: u64,
    market: MarketKind,
    days: usize,
    noise_sd: f64,
) -> (Vec<PriceSeries>, Vec<QuantileForecast>) {
    assert!(noise_sd >= 0.0 && noise_sd.is_finite(), "noise_sd must be non-negative");
    let mut prices = PriceModel::new(seed);
    let mut forecasts = ForecastModel::new(seed, &DEFAULT_LEVELS, noise_sd);
    let per_day = match market {
        MarketKind::Dam => 1,
        MarketKind::Bm => 3,
    };
    let mut actual_out = Vec::with_capacity(days * per_day);
    let mut forecast_out = Vec::with_capacity(days * per_day);
    for d in 0..days {
        let day_start = SYNTHETIC_EPOCH + d as i64 * DAY_SECS;
        let level = prices.day_level();
        for w in 0..per_day {
            let start = day_start + w as i64 * DAY_SECS / per_day as i64;
            let window = TradingWindow::standard(market, start);
            let actual = window_series(&mut prices, window, day_start, level);
            forecast_out.push(forecasts.forecast(&actual, &DEFAULT_LEVELS));
            actual_out.push(actual);
        }
    }
    (actual_out, forecast_out)
}

#[derive(Debug, Clone)]
pub struct SyntheticDual {
    pub dam_actuals: Vec<PriceSeries>,
    pub dam_forecasts: Vec<QuantileForecast>,
    pub bm_actuals: Vec<PriceSeries>,
    pub bm_forecasts: Vec<QuantileForecast>,
}

/// Per day: a 24-hour DAM window and the 16-slot BM window opening at the
/// same instant, both drawn around the same daily profile.
pub fn generate_synthetic_dual(seed: u64, days: usize, noise_sd: f64) -> SyntheticDual {
    assert!(noise_sd >= 0.0 && noise_sd.is_finite(), "noise_sd must be non-negative");
    let mut prices = PriceModel::new(seed);
    let mut dam_fc = ForecastModel::new(seed, &DEFAULT_LEVELS, noise_sd);
    let mut bm_fc = ForecastModel::new(seed ^ 0x9e37_79b9_7f4a_7c15, &DEFAULT_LEVELS, noise_sd);
    let mut out = SyntheticDual {
        dam_actuals: Vec::with_capacity(days),
        dam_forecasts: Vec::with_capacity(days),
        bm_actuals: Vec::with_capacity(days),
        bm_forecasts: Vec::with_capacity(days),
    };
    for d in 0..days {
        let day_start = SYNTHETIC_EPOCH + d as i64 * DAY_SECS;
        let level = prices.day_level();
        let dam = window_series(&mut prices, TradingWindow::standard(MarketKind::Dam, day_start), day_start, level);
        let bm = window_series(&mut prices, TradingWindow::standard(MarketKind::Bm, day_start), day_start, level);
        out.dam_forecasts.push(dam_fc.forecast(&dam, &DEFAULT_LEVELS));
        out.bm_forecasts.push(bm_fc.forecast(&bm, &DEFAULT_LEVELS));
        out.dam_actuals.push(dam);
        out.bm_actuals.push(bm);
    }
    out
}
