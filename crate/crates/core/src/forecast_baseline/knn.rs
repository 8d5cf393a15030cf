use std::cmp::Ordering;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::Decimal;

use super::{BaselineError, FeatureMatrix, Result};
use crate::market_data::{QuantileForecast, TradingWindow};

/// Per-feature mean and standard deviation of a training set. Constant
/// features get unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &FeatureMatrix) -> Self {
        let d = train.feature_names.len();
        let n = train.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in &train.rows {
            for (m, x) in mean.iter_mut().zip(&r.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in &train.rows {
            for ((v, x), m) in var.iter_mut().zip(&r.features).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

/// Inclusive linear interpolation between order statistics: with sorted
/// `v` of length `n`, position `h = (n - 1) q` gives
/// `v[floor h] + frac(h) (v[floor h + 1] - v[floor h])`.
pub fn empirical_quantile(sorted: &[Decimal], level: Decimal) -> Decimal {
    let h = Decimal::from(sorted.len() - 1) * level;
    let lo = h.floor();
    let i = lo.to_usize().unwrap_or(0);
    let frac = h - lo;
    match sorted.get(i + 1) {
        Some(next) if !frac.is_zero() => sorted[i] + frac * (*next - sorted[i]),
        _ => sorted[i],
    }
}

/// Indices of the `k` training rows nearest to `query` (Euclidean distance
/// on standardized features), nearest first, older rows first on ties.
fn neighbours(train: &FeatureMatrix, scaler: &Standardizer, query: &[f64], k: usize) -> Vec<usize> {
    let q = scaler.apply(query);
    let mut dist: Vec<(f64, usize)> = train
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let x = scaler.apply(&r.features);
            (x.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i)
        })
        .collect();
    dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
    dist.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Quantile forecast for `window` from the `k` nearest training rows: per
/// delivery period, the [`empirical_quantile`] of their targets at each
/// level.
pub fn knn_predict(
    train: &FeatureMatrix,
    query: &[f64],
    k: usize,
    levels: &[Decimal],
    window: TradingWindow,
) -> Result<QuantileForecast> {
    if train.is_empty() {
        return Err(BaselineError::EmptyTrainSet);
    }
    if k == 0 || k > train.len() {
        return Err(BaselineError::KTooLarge { k, rows: train.len() });
    }
    if query.len() != train.feature_names.len() {
        return Err(BaselineError::DimensionMismatch(format!(
            "query has {} features, training set {}",
            query.len(),
            train.feature_names.len()
        )));
    }
    if window.period_count != train.horizon {
        return Err(BaselineError::DimensionMismatch(format!(
            "window has {} periods, targets {}",
            window.period_count, train.horizon
        )));
    }
    let scaler = Standardizer::fit(train);
    let near = neighbours(train, &scaler, query, k);
    let rows = (0..train.horizon)
        .map(|step| {
            let mut v: Vec<Decimal> = near.iter().map(|i| train.rows[*i].targets[step]).collect();
            v.sort();
            levels.iter().map(|l| empirical_quantile(&v, *l)).collect()
        })
        .collect();
    Ok(QuantileForecast::new(window, levels.to_vec(), rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast_baseline::FeatureRow;
    use crate::market_data::MarketKind;
    use proptest::prelude::*;
    use rust_decimal_macros::dec;

    fn matrix(rows: &[(f64, i64)]) -> FeatureMatrix {
        let rows = rows
            .iter()
            .enumerate()
            .map(|(i, (x, y))| FeatureRow {
                timestamp: i as i64,
                features: vec![*x],
                targets: vec![Decimal::from(*y)],
            })
            .collect();
        FeatureMatrix::new(vec!["x".into()], 1, rows).unwrap()
    }

    fn window() -> TradingWindow {
        TradingWindow::new(MarketKind::Dam, 0, 1).unwrap()
    }

    #[test]
    fn quantile_rule() {
        let v = [dec!(10), dec!(20), dec!(30)];
        assert_eq!(empirical_quantile(&v, dec!(0.5)), dec!(20));
        assert_eq!(empirical_quantile(&v, dec!(0.9)), dec!(28.0));
        assert_eq!(empirical_quantile(&v, dec!(0.1)), dec!(12.0));
        assert_eq!(empirical_quantile(&[dec!(7)], dec!(0.3)), dec!(7));
    }

    #[test]
    fn three_neighbours() {
        let train = matrix(&[(0.0, 10), (1.0, 20), (2.0, 30), (50.0, 99)]);
        let f = knn_predict(&train, &[1.0], 3, &[dec!(0.5), dec!(0.9)], window()).unwrap();
        assert_eq!(f.rows[0], vec![dec!(20), dec!(28.0)]);
    }

    #[test]
    fn nearest_neighbour_identity_and_ties() {
        let train = matrix(&[(0.0, 10), (4.0, 20), (2.0, 30)]);
        let f = knn_predict(&train, &[4.0], 1, &[dec!(0.1), dec!(0.9)], window()).unwrap();
        assert_eq!(f.rows[0], vec![dec!(20), dec!(20)]);
        // 0 and 4 are equidistant from 2; the older row wins
        let train = matrix(&[(0.0, 10), (4.0, 20)]);
        let f = knn_predict(&train, &[2.0], 1, &[dec!(0.5)], window()).unwrap();
        assert_eq!(f.rows[0], vec![dec!(10)]);
    }

    #[test]
    fn errors() {
        let empty = FeatureMatrix::new(vec!["x".into()], 1, vec![]).unwrap();
        assert_eq!(knn_predict(&empty, &[0.0], 1, &[dec!(0.5)], window()), Err(BaselineError::EmptyTrainSet));
        let train = matrix(&[(0.0, 1)]);
        assert_eq!(
            knn_predict(&train, &[0.0], 2, &[dec!(0.5)], window()),
            Err(BaselineError::KTooLarge { k: 2, rows: 1 })
        );
    }

    proptest! {
        #[test]
        fn forecasts_are_monotone_across_levels(
            data in prop::collection::vec((-5.0f64..5.0, -50i64..200), 1..30), k in 1usize..30, q in -5.0f64..5.0,
        ) {
            let train = matrix(&data);
            let k = k.min(train.len());
            let levels = [dec!(0.1), dec!(0.3), dec!(0.5), dec!(0.7), dec!(0.9)];
            let f = knn_predict(&train, &[q], k, &levels, window()).unwrap();
            prop_assert!(f.is_monotone());
        }
    }
}
