//! Candidate buy/sell pair selection over a period range.

use rust_decimal::Decimal;

use super::{unit_spread, CandidatePair, PairRule, QuantilePair, Result, StrategyError};
use crate::battery::BatterySpec;
use crate::market_data::QuantileForecast;

/// Sell and buy price curves for one window.
#[derive(Debug, Clone)]
pub(crate) struct PriceCurves {
    pub sell: Vec<Decimal>,
    pub buy: Vec<Decimal>,
}

impl PriceCurves {
    /// Among `t1 < t2` in `[lo, hi]`, the pair maximising the expected spread
    /// of buying at `t1` and selling at `t2`; earliest `t1`, then earliest
    /// `t2`, on ties. `None` unless the best spread is positive.
    fn best_ordered(&self, spec: &BatterySpec, lo: usize, hi: usize) -> Option<CandidatePair> {
        if hi <= lo {
            return None;
        }
        let mut cheapest = lo;
        let mut best: Option<CandidatePair> = None;
        for t2 in lo + 1..=hi {
            // earliest argmin of the buy curve over [lo, t2)
            if self.buy[t2 - 1] < self.buy[cheapest] {
                cheapest = t2 - 1;
            }
            let spread = unit_spread(self.sell[t2], self.buy[cheapest], spec);
            if best.is_none_or(|b| spread > b.expected_spread) {
                best = Some(CandidatePair {
                    buy_period: cheapest,
                    sell_period: t2,
                    buy_price: self.buy[cheapest],
                    sell_price: self.sell[t2],
                    expected_spread: spread,
                });
            }
        }
        best.filter(|b| b.expected_spread > Decimal::ZERO)
    }

    /// Buy at the earliest minimum of the buy curve, sell at the earliest
    /// maximum of the sell curve, in either order.
    fn best_unordered(&self, spec: &BatterySpec, lo: usize, hi: usize) -> Option<CandidatePair> {
        if hi <= lo {
            return None;
        }
        let range = lo..=hi;
        let buy_period = range.clone().fold(lo, |m, t| if self.buy[t] < self.buy[m] { t } else { m });
        let sell_period = range.fold(lo, |m, t| if self.sell[t] > self.sell[m] { t } else { m });
        if buy_period == sell_period {
            return None;
        }
        let spread = unit_spread(self.sell[sell_period], self.buy[buy_period], spec);
        (spread > Decimal::ZERO).then_some(CandidatePair {
            buy_period,
            sell_period,
            buy_price: self.buy[buy_period],
            sell_price: self.sell[sell_period],
            expected_spread: spread,
        })
    }
}

/// Price curves for a forecast and quantile pair under a pair rule.
#[derive(Debug, Clone)]
pub(crate) enum Pricing {
    Conservative(PriceCurves),
    SingleCurve { lower: PriceCurves, upper: PriceCurves },
}

fn curve(forecast: &QuantileForecast, level: Decimal) -> Result<Vec<Decimal>> {
    forecast.curve(level).ok_or(StrategyError::LevelMissing(level))
}

impl Pricing {
    pub fn new(forecast: &QuantileForecast, pair: QuantilePair, rule: PairRule) -> Result<Self> {
        let lower = curve(forecast, pair.sell_level())?;
        let upper = curve(forecast, pair.buy_level())?;
        Ok(match rule {
            PairRule::Conservative => Pricing::Conservative(PriceCurves { sell: lower, buy: upper }),
            PairRule::SingleCurve => Pricing::SingleCurve {
                lower: PriceCurves {
                    sell: lower.clone(),
                    buy: lower,
                },
                upper: PriceCurves {
                    sell: upper.clone(),
                    buy: upper,
                },
            },
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Pricing::Conservative(c) => c.sell.len(),
            Pricing::SingleCurve { lower, .. } => lower.sell.len(),
        }
    }

    fn pick(
        &self,
        f: impl Fn(&PriceCurves) -> Option<CandidatePair>,
    ) -> Option<CandidatePair> {
        match self {
            Pricing::Conservative(c) => f(c),
            Pricing::SingleCurve { lower, upper } => match (f(lower), f(upper)) {
                (Some(a), Some(b)) => Some(if b.expected_spread > a.expected_spread { b } else { a }),
                (a, b) => a.or(b),
            },
        }
    }

    pub fn best_ordered(&self, spec: &BatterySpec, lo: usize, hi: usize) -> Option<CandidatePair> {
        self.pick(|c| c.best_ordered(spec, lo, hi))
    }

    pub fn best_unordered(&self, spec: &BatterySpec, lo: usize, hi: usize) -> Option<CandidatePair> {
        self.pick(|c| c.best_unordered(spec, lo, hi))
    }
}

fn check_range(forecast: &QuantileForecast, lo: usize, hi: usize) -> Result<()> {
    let len = forecast.window.period_count;
    if lo > hi || hi >= len {
        return Err(StrategyError::InvalidRange { lo, hi, len });
    }
    Ok(())
}

pub fn best_ordered_pair(
    forecast: &QuantileForecast,
    pair: QuantilePair,
    spec: &BatterySpec,
    lo: usize,
    hi: usize,
) -> Result<Option<CandidatePair>> {
    best_ordered_pair_with(forecast, pair, spec, lo, hi, PairRule::Conservative)
}

pub fn best_ordered_pair_with(
    forecast: &QuantileForecast,
    pair: QuantilePair,
    spec: &BatterySpec,
    lo: usize,
    hi: usize,
    rule: PairRule,
) -> Result<Option<CandidatePair>> {
    let pricing = Pricing::new(forecast, pair, rule)?;
    check_range(forecast, lo, hi)?;
    Ok(pricing.best_ordered(spec, lo, hi))
}

pub fn best_unordered_pair(
    forecast: &QuantileForecast,
    pair: QuantilePair,
    spec: &BatterySpec,
    lo: usize,
    hi: usize,
) -> Result<Option<CandidatePair>> {
    best_unordered_pair_with(forecast, pair, spec, lo, hi, PairRule::Conservative)
}

pub fn best_unordered_pair_with(
    forecast: &QuantileForecast,
    pair: QuantilePair,
    spec: &BatterySpec,
    lo: usize,
    hi: usize,
    rule: PairRule,
) -> Result<Option<CandidatePair>> {
    let pricing = Pricing::new(forecast, pair, rule)?;
    check_range(forecast, lo, hi)?;
    Ok(pricing.best_unordered(spec, lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{MarketKind, TradingWindow};
    use proptest::prelude::*;
    use rust_decimal_macros::dec;

    fn two_curve(sell: &[Decimal], buy: &[Decimal]) -> (QuantileForecast, QuantilePair) {
        let w = TradingWindow::new(MarketKind::Dam, 0, sell.len()).unwrap();
        let rows = sell.iter().zip(buy).map(|(s, b)| vec![*s, *b]).collect();
        let f = QuantileForecast::new(w, vec![dec!(0.3), dec!(0.7)], rows).unwrap();
        (f, QuantilePair::new(dec!(0.3), dec!(0.7)).unwrap())
    }

    /// Exhaustive scan over every ordered pair, in (t1, t2) lexicographic order.
    fn brute_ordered(sell: &[Decimal], buy: &[Decimal], spec: &BatterySpec, lo: usize, hi: usize) -> Option<(usize, usize, Decimal)> {
        let mut best: Option<(usize, usize, Decimal)> = None;
        for t1 in lo..=hi {
            for t2 in t1 + 1..=hi {
                let s = sell[t2] * spec.discharge_eff - buy[t1] / spec.charge_eff;
                if best.is_none_or(|(_, _, b)| s > b) {
                    best = Some((t1, t2, s));
                }
            }
        }
        best.filter(|b| b.2 > Decimal::ZERO)
    }

    #[test]
    fn ordered_example() {
        let sell = [dec!(20), dec!(10), dec!(40), dec!(30)];
        let buy = [dec!(22), dec!(12), dec!(42), dec!(33)];
        let spec = BatterySpec::reference();
        let oracle = brute_ordered(&sell, &buy, &spec, 0, 3).unwrap();
        assert_eq!((oracle.0, oracle.1), (1, 2));
        assert_eq!(oracle.2.round_dp(3), dec!(19.755));
        let (f, pair) = two_curve(&sell, &buy);
        let c = best_ordered_pair(&f, pair, &spec, 0, 3).unwrap().unwrap();
        assert_eq!((c.buy_period, c.sell_period), (1, 2));
        assert_eq!(c.expected_spread, oracle.2);
    }

    #[test]
    fn ordered_none_cases() {
        let spec = BatterySpec::reference();
        let down = [dec!(40), dec!(30), dec!(20), dec!(10)];
        let (f, pair) = two_curve(&down, &down);
        assert_eq!(best_ordered_pair(&f, pair, &spec, 0, 3).unwrap(), None);
        let (f, pair) = two_curve(&[dec!(1), dec!(90)], &[dec!(1), dec!(90)]);
        assert_eq!(best_ordered_pair(&f, pair, &spec, 1, 1).unwrap(), None);
        assert!(matches!(
            best_ordered_pair(&f, pair, &spec, 0, 2),
            Err(StrategyError::InvalidRange { .. })
        ));
        let missing = QuantilePair::new(dec!(0.1), dec!(0.7)).unwrap();
        assert_eq!(
            best_ordered_pair(&f, missing, &spec, 0, 1),
            Err(StrategyError::LevelMissing(dec!(0.1)))
        );
    }

    #[test]
    fn unordered_example() {
        let spec = BatterySpec::reference();
        let sell = [dec!(20), dec!(25), dec!(50), dec!(30), dec!(35), dec!(30)];
        let buy = [dec!(22), dec!(27), dec!(52), dec!(33), dec!(36), dec!(10)];
        let (f, pair) = two_curve(&sell, &buy);
        let c = best_unordered_pair(&f, pair, &spec, 0, 5).unwrap().unwrap();
        assert_eq!((c.buy_period, c.sell_period), (5, 2));
        // 0.8 * 50 - 10 / 0.98
        assert_eq!(c.expected_spread.round_dp(3), dec!(29.796));
    }

    #[test]
    fn unordered_none_cases() {
        let spec = BatterySpec::reference();
        let flat = [dec!(30); 4];
        let (f, pair) = two_curve(&flat, &flat);
        // 24 - 30.61 < 0
        assert_eq!(best_unordered_pair(&f, pair, &spec, 0, 3).unwrap(), None);
        let sell = [dec!(10), dec!(90), dec!(20)];
        let buy = [dec!(15), dec!(5), dec!(25)];
        let (f, pair) = two_curve(&sell, &buy);
        // argmin of buy and argmax of sell both at period 1
        assert_eq!(best_unordered_pair(&f, pair, &spec, 0, 2).unwrap(), None);
    }

    #[test]
    fn single_curve_rule_prefers_larger_spread() {
        let spec = BatterySpec::reference();
        let sell = [dec!(10), dec!(60)];
        let buy = [dec!(50), dec!(120)];
        let (f, pair) = two_curve(&sell, &buy);
        // 0.8*60 - 50/0.98 < 0
        assert_eq!(best_ordered_pair(&f, pair, &spec, 0, 1).unwrap(), None);
        let c = best_ordered_pair_with(&f, pair, &spec, 0, 1, PairRule::SingleCurve).unwrap().unwrap();
        // upper curve: 0.8*120 - 50/0.98 beats lower curve 0.8*60 - 10/0.98
        assert_eq!(c.sell_price, dec!(120));
    }

    proptest! {
        #[test]
        fn ordered_matches_brute_force(
            vals in prop::collection::vec((0i64..60, 0i64..15), 2..30),
            lo_frac in 0.0f64..1.0, span in 0usize..30,
        ) {
            let sell: Vec<Decimal> = vals.iter().map(|(s, _)| Decimal::from(*s)).collect();
            let buy: Vec<Decimal> = vals.iter().map(|(s, d)| Decimal::from(s + d)).collect();
            let n = sell.len();
            let lo = ((n - 1) as f64 * lo_frac) as usize;
            let hi = (lo + span).min(n - 1);
            let spec = BatterySpec::reference();
            let (f, pair) = two_curve(&sell, &buy);
            let got = best_ordered_pair(&f, pair, &spec, lo, hi).unwrap()
                .map(|c| (c.buy_period, c.sell_period, c.expected_spread));
            prop_assert_eq!(got, brute_ordered(&sell, &buy, &spec, lo, hi));
        }

        #[test]
        fn ordered_argmax_scale_invariant(
            vals in prop::collection::vec(1i64..100, 2..24), scale in 1i64..50,
        ) {
            let prices: Vec<Decimal> = vals.iter().map(|v| Decimal::from(*v)).collect();
            let scaled: Vec<Decimal> = prices.iter().map(|p| *p * Decimal::from(scale)).collect();
            let spec = BatterySpec::reference();
            let (f, pair) = two_curve(&prices, &prices);
            let (g, _) = two_curve(&scaled, &scaled);
            let a = best_ordered_pair(&f, pair, &spec, 0, prices.len() - 1).unwrap();
            let b = best_ordered_pair(&g, pair, &spec, 0, prices.len() - 1).unwrap();
            if let Some(a) = a {
                let b = b.expect("positive spread stays positive under scaling");
                prop_assert_eq!((a.buy_period, a.sell_period), (b.buy_period, b.sell_period));
            }
        }
    }
}
