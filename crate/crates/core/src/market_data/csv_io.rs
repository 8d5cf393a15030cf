//! Price and forecast CSV files.
//!
//! Rows are grouped into windows of `period_count` consecutive settlement
//! periods. A jump in timestamps is allowed between windows but not inside
//! one. A partial window at the end of the file is dropped with a warning.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use rust_decimal::Decimal;

use super::{validate_and_repair, MarketDataError, MarketKind, PriceSeries, QuantileForecast, Result, TradingWindow};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestWarning {
    IncompleteWindow { start: i64, rows: usize, expected: usize },
    RepairedPeriods { start: i64, periods: usize },
}

impl fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IngestWarning::IncompleteWindow { start, rows, expected } => write!(
                f,
                "dropped incomplete trailing window at {}: {rows} of {expected} periods",
                format_timestamp(*start)
            ),
            IngestWarning::RepairedPeriods { start, periods } => write!(
                f,
                "window at {}: re-sorted crossed quantiles in {periods} periods",
                format_timestamp(*start)
            ),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedPrices {
    pub series: Vec<PriceSeries>,
    pub warnings: Vec<IngestWarning>,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedForecasts {
    pub forecasts: Vec<QuantileForecast>,
    pub warnings: Vec<IngestWarning>,
}

pub fn parse_timestamp(text: &str) -> std::result::Result<i64, String> {
    DateTime::parse_from_rfc3339(text.trim())
        .map(|t| t.with_timezone(&Utc).timestamp())
        .map_err(|e| format!("bad timestamp `{text}`: {e}"))
}

pub fn format_timestamp(epoch: i64) -> String {
    DateTime::<Utc>::from_timestamp(epoch, 0)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| epoch.to_string())
}

fn parse_decimal(text: &str) -> std::result::Result<Decimal, String> {
    let t = text.trim();
    Decimal::from_str(t)
        .or_else(|_| Decimal::from_scientific(t))
        .map_err(|_| format!("not a number: `{text}`"))
}

/// Groups timestamped rows into windows of `period_count` periods.
struct Tiler<T> {
    market: MarketKind,
    period_count: usize,
    last_ts: Option<i64>,
    current: Option<(i64, Vec<T>)>,
    done: Vec<(i64, Vec<T>)>,
}

impl<T> Tiler<T> {
    fn new(market: MarketKind, period_count: usize) -> Self {
        Tiler {
            market,
            period_count,
            last_ts: None,
            current: None,
            done: Vec::new(),
        }
    }

    fn push(&mut self, line: usize, ts: i64, value: T) -> Result<()> {
        if self.last_ts.is_some_and(|prev| ts <= prev) {
            return Err(MarketDataError::NonMonotonicTimestamps { line });
        }
        self.last_ts = Some(ts);
        match &mut self.current {
            None => self.current = Some((ts, vec![value])),
            Some((start, values)) => {
                let expected = *start + values.len() as i64 * self.market.period_secs();
                if ts != expected {
                    return Err(MarketDataError::MissingPeriod {
                        line,
                        window_start: format_timestamp(*start),
                        expected: format_timestamp(expected),
                    });
                }
                values.push(value);
            }
        }
        if self.current.as_ref().is_some_and(|(_, v)| v.len() == self.period_count) {
            self.done.push(self.current.take().expect("window present"));
        }
        Ok(())
    }

    fn finish(self) -> (Vec<(i64, Vec<T>)>, Option<IngestWarning>) {
        let warning = self.current.map(|(start, v)| IngestWarning::IncompleteWindow {
            start,
            rows: v.len(),
            expected: self.period_count,
        });
        (self.done, warning)
    }
}

fn csv_error(e: csv::Error) -> MarketDataError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => MarketDataError::Io(io.to_string()),
        other => MarketDataError::MalformedRow {
            line,
            reason: format!("{other:?}"),
        },
    }
}

pub fn parse_price_csv(path: impl AsRef<Path>, market: MarketKind) -> Result<ParsedPrices> {
    let file = File::open(path.as_ref())
        .map_err(|e| MarketDataError::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_price_reader(file, market, market.default_period_count())
}

/// Header must be exactly `timestamp,price`.
pub fn parse_price_reader<R: Read>(reader: R, market: MarketKind, period_count: usize) -> Result<ParsedPrices> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names != ["timestamp", "price"] {
        if let Some(bad) = names.iter().find(|n| !["timestamp", "price"].contains(n)) {
            return Err(MarketDataError::UnknownColumn(bad.to_string()));
        }
        return Err(MarketDataError::MalformedRow {
            line: 1,
            reason: "header must be `timestamp,price`".into(),
        });
    }
    let mut tiler = Tiler::new(market, period_count);
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(csv_error)?;
        if rec.len() != 2 {
            return Err(MarketDataError::MalformedRow {
                line,
                reason: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let ts = parse_timestamp(&rec[0]).map_err(|reason| MarketDataError::MalformedRow { line, reason })?;
        let price = parse_decimal(&rec[1]).map_err(|reason| MarketDataError::MalformedRow { line, reason })?;
        tiler.push(line, ts, price)?;
    }
    let (windows, warning) = tiler.finish();
    let series = windows
        .into_iter()
        .map(|(start, prices)| PriceSeries::new(TradingWindow::new(market, start, period_count)?, prices))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParsedPrices {
        series,
        warnings: warning.into_iter().collect(),
    })
}

pub fn parse_forecast_csv(path: impl AsRef<Path>, market: MarketKind) -> Result<ParsedForecasts> {
    let file = File::open(path.as_ref())
        .map_err(|e| MarketDataError::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_forecast_reader(file, market, market.default_period_count())
}

fn level_of_column(name: &str) -> Result<Decimal> {
    let pct = name
        .strip_prefix('q')
        .and_then(|p| Decimal::from_str(p).ok())
        .ok_or_else(|| MarketDataError::UnknownColumn(name.to_string()))?;
    let level = pct / Decimal::ONE_HUNDRED;
    if level <= Decimal::ZERO || level >= Decimal::ONE {
        return Err(MarketDataError::LevelOutOfRange(name.to_string()));
    }
    Ok(level.normalize())
}

/// Header `timestamp,q<percent>...`; columns may appear in any order.
/// Every emitted forecast has been through [`validate_and_repair`].
pub fn parse_forecast_reader<R: Read>(reader: R, market: MarketKind, period_count: usize) -> Result<ParsedForecasts> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    let mut cols = headers.iter().map(str::trim);
    match cols.next() {
        Some("timestamp") => {}
        Some(other) => return Err(MarketDataError::UnknownColumn(other.to_string())),
        None => {
            return Err(MarketDataError::MalformedRow {
                line: 1,
                reason: "empty header".into(),
            })
        }
    }
    let mut seen = HashSet::new();
    let mut levels = Vec::new();
    for name in cols {
        let level = level_of_column(name)?;
        if !seen.insert(level) {
            return Err(MarketDataError::DuplicateLevel(name.to_string()));
        }
        levels.push(level);
    }
    if levels.is_empty() {
        return Err(MarketDataError::MalformedRow {
            line: 1,
            reason: "no quantile columns".into(),
        });
    }
    // order[i] = file column holding the i-th smallest level
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].cmp(&levels[b]));
    let sorted_levels: Vec<Decimal> = order.iter().map(|&i| levels[i]).collect();

    let mut tiler = Tiler::new(market, period_count);
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(csv_error)?;
        if rec.len() != levels.len() + 1 {
            return Err(MarketDataError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", levels.len() + 1, rec.len()),
            });
        }
        let ts = parse_timestamp(&rec[0]).map_err(|reason| MarketDataError::MalformedRow { line, reason })?;
        let raw = (1..rec.len())
            .map(|j| parse_decimal(&rec[j]))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|reason| MarketDataError::MalformedRow { line, reason })?;
        tiler.push(line, ts, order.iter().map(|&c| raw[c]).collect::<Vec<_>>())?;
    }
    let (windows, warning) = tiler.finish();
    let mut out = ParsedForecasts::default();
    for (start, rows) in windows {
        let f = QuantileForecast::new(TradingWindow::new(market, start, period_count)?, sorted_levels.clone(), rows)?;
        let (f, repairs) = validate_and_repair(f);
        if repairs > 0 {
            out.warnings.push(IngestWarning::RepairedPeriods { start, periods: repairs });
        }
        out.forecasts.push(f);
    }
    out.warnings.extend(warning);
    Ok(out)
}

pub fn write_price_csv<W: Write>(mut w: W, series: &[PriceSeries]) -> std::io::Result<()> {
    writeln!(w, "timestamp,price")?;
    for s in series {
        for (i, p) in s.prices.iter().enumerate() {
            writeln!(w, "{},{}", format_timestamp(s.window.timestamp(i)), p)?;
        }
    }
    Ok(())
}

fn column_of_level(level: Decimal) -> String {
    format!("q{}", (level * Decimal::ONE_HUNDRED).normalize())
}

/// All forecasts must share one level set.
pub fn write_forecast_csv<W: Write>(mut w: W, forecasts: &[QuantileForecast]) -> std::io::Result<()> {
    let Some(first) = forecasts.first() else {
        return writeln!(w, "timestamp");
    };
    if forecasts.iter().any(|f| f.levels != first.levels) {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "forecasts in one file must share quantile levels",
        ));
    }
    let header: Vec<String> = std::iter::once("timestamp".to_string())
        .chain(first.levels.iter().map(|l| column_of_level(*l)))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for f in forecasts {
        for (i, row) in f.rows.iter().enumerate() {
            write!(w, "{}", format_timestamp(f.window.timestamp(i)))?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rust_decimal_macros::dec;

    fn hourly(n: usize, start: i64, step: i64) -> String {
        let mut s = String::from("timestamp,price\n");
        for i in 0..n {
            s.push_str(&format!("{},{}.5\n", format_timestamp(start + i as i64 * step), i));
        }
        s
    }

    #[test]
    fn one_dam_day() {
        let parsed = parse_price_reader(hourly(24, 0, 3600).as_bytes(), MarketKind::Dam, 24).unwrap();
        assert_eq!(parsed.series.len(), 1);
        assert_eq!(parsed.series[0].window.period_count, 24);
        assert!(parsed.warnings.is_empty());
    }

    #[test]
    fn gap_inside_window_is_missing_period() {
        // a 48-slot BM day with one half-hour missing: 47 rows
        let mut s = String::from("timestamp,price\n");
        for i in (0..48).filter(|&i| i != 20) {
            s.push_str(&format!("{},10\n", format_timestamp(i * 1800)));
        }
        let err = parse_price_reader(s.as_bytes(), MarketKind::Bm, 16).unwrap_err();
        assert!(matches!(err, MarketDataError::MissingPeriod { .. }), "{err}");
    }

    #[test]
    fn trailing_partial_window_dropped_with_warning() {
        let parsed = parse_price_reader(hourly(47, 0, 1800).as_bytes(), MarketKind::Bm, 16).unwrap();
        assert_eq!(parsed.series.len(), 2);
        assert_eq!(
            parsed.warnings,
            vec![IngestWarning::IncompleteWindow {
                start: 32 * 1800,
                rows: 15,
                expected: 16
            }]
        );
    }

    #[test]
    fn gap_between_windows_allowed() {
        let mut text = hourly(16, 0, 1800);
        text.push_str(&hourly(16, 86400, 1800).replace("timestamp,price\n", ""));
        let parsed = parse_price_reader(text.as_bytes(), MarketKind::Bm, 16).unwrap();
        assert_eq!(parsed.series.len(), 2);
        assert_eq!(parsed.series[1].window.start, 86400);
    }

    #[test]
    fn negative_prices_kept() {
        let text = "timestamp,price\n2024-01-01T00:00:00Z,-5.0\n2024-01-01T00:30:00Z,120.0\n";
        let parsed = parse_price_reader(text.as_bytes(), MarketKind::Bm, 2).unwrap();
        assert_eq!(parsed.series[0].prices, vec![dec!(-5.0), dec!(120.0)]);
        let mut out = Vec::new();
        write_price_csv(&mut out, &parsed.series).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn price_errors() {
        let dup = "timestamp,price\n2024-01-01T00:00:00Z,1\n2024-01-01T00:00:00Z,2\n";
        assert!(matches!(
            parse_price_reader(dup.as_bytes(), MarketKind::Dam, 24),
            Err(MarketDataError::NonMonotonicTimestamps { line: 3 })
        ));
        let bad = "timestamp,price\n2024-01-01T00:00:00Z,abc\n";
        assert!(matches!(
            parse_price_reader(bad.as_bytes(), MarketKind::Dam, 24),
            Err(MarketDataError::MalformedRow { line: 2, .. })
        ));
        let header = "time,price\n";
        assert!(matches!(
            parse_price_reader(header.as_bytes(), MarketKind::Dam, 24),
            Err(MarketDataError::UnknownColumn(_))
        ));
    }

    #[test]
    fn forecast_header_levels() {
        let text = "timestamp,q10,q50,q90\n1970-01-01T00:00:00Z,1,2,3\n";
        let f = parse_forecast_reader(text.as_bytes(), MarketKind::Dam, 1).unwrap();
        assert_eq!(f.forecasts[0].levels, vec![dec!(0.1), dec!(0.5), dec!(0.9)]);
    }

    #[test]
    fn forecast_columns_sorted() {
        let text = "timestamp,q50,q10\n1970-01-01T00:00:00Z,7,3\n";
        let f = parse_forecast_reader(text.as_bytes(), MarketKind::Dam, 1).unwrap();
        assert_eq!(f.forecasts[0].levels, vec![dec!(0.1), dec!(0.5)]);
        assert_eq!(f.forecasts[0].rows[0], vec![dec!(3), dec!(7)]);
    }

    #[test]
    fn forecast_header_errors() {
        let zero = "timestamp,q0\n";
        assert!(matches!(
            parse_forecast_reader(zero.as_bytes(), MarketKind::Dam, 1),
            Err(MarketDataError::LevelOutOfRange(_))
        ));
        let hundred = "timestamp,q100\n";
        assert!(matches!(
            parse_forecast_reader(hundred.as_bytes(), MarketKind::Dam, 1),
            Err(MarketDataError::LevelOutOfRange(_))
        ));
        let unknown = "timestamp,median\n";
        assert!(matches!(
            parse_forecast_reader(unknown.as_bytes(), MarketKind::Dam, 1),
            Err(MarketDataError::UnknownColumn(_))
        ));
        let dup = "timestamp,q50,q50.0\n";
        assert!(matches!(
            parse_forecast_reader(dup.as_bytes(), MarketKind::Dam, 1),
            Err(MarketDataError::DuplicateLevel(_))
        ));
    }

    #[test]
    fn crossed_forecast_repaired_on_ingest() {
        let text = "timestamp,q10,q50,q90\n1970-01-01T00:00:00Z,30,20,40\n";
        let f = parse_forecast_reader(text.as_bytes(), MarketKind::Dam, 1).unwrap();
        assert_eq!(f.forecasts[0].rows[0], vec![dec!(20), dec!(30), dec!(40)]);
        assert_eq!(f.warnings, vec![IngestWarning::RepairedPeriods { start: 0, periods: 1 }]);
    }

    fn price_text() -> impl Strategy<Value = String> {
        (1usize..4, prop::collection::vec(-50_000i64..50_000, 48)).prop_map(|(windows, cents)| {
            let n = windows * 16;
            let mut s = String::from("timestamp,price\n");
            for (i, c) in cents.iter().take(n).enumerate() {
                s.push_str(&format!("{},{}\n", format_timestamp(1_700_000_000 + i as i64 * 1800), Decimal::new(*c, 2)));
            }
            s
        })
    }

    proptest! {
        #[test]
        fn price_csv_round_trip(text in price_text()) {
            let parsed = parse_price_reader(text.as_bytes(), MarketKind::Bm, 16).unwrap();
            let mut out = Vec::new();
            write_price_csv(&mut out, &parsed.series).unwrap();
            prop_assert_eq!(std::str::from_utf8(&out).unwrap(), text.as_str());
            let again = parse_price_reader(out.as_slice(), MarketKind::Bm, 16).unwrap();
            prop_assert_eq!(again.series, parsed.series);
        }

        #[test]
        fn forecast_csv_round_trip(vals in prop::collection::vec(prop::collection::vec(-9_999i64..9_999, 3), 24)) {
            let rows: Vec<Vec<Decimal>> = vals.into_iter().map(|mut r| { r.sort(); r.into_iter().map(|c| Decimal::new(c, 1)).collect() }).collect();
            let f = QuantileForecast::new(TradingWindow::standard(MarketKind::Dam, 0), vec![dec!(0.1), dec!(0.5), dec!(0.9)], rows).unwrap();
            let mut out = Vec::new();
            write_forecast_csv(&mut out, std::slice::from_ref(&f)).unwrap();
            let parsed = parse_forecast_reader(out.as_slice(), MarketKind::Dam, 24).unwrap();
            prop_assert_eq!(&parsed.forecasts[0], &f);
            let mut again = Vec::new();
            write_forecast_csv(&mut again, &parsed.forecasts).unwrap();
            prop_assert_eq!(again, out);
        }
    }
}
