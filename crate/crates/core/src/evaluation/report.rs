//! Tabular forms of a sweep: one row per cell, the pair-by-column results
//! table, and min/mean/max plot data.

use std::fmt;
use std::io::Write;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::{cents, BacktestReport, SweepReport};
use crate::strategies::{QuantilePair, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ReportMarket {
    Dam,
    Bm,
    Dual,
}

impl fmt::Display for ReportMarket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportMarket::Dam => "DAM",
            ReportMarket::Bm => "BM",
            ReportMarket::Dual => "DUAL",
        })
    }
}

fn mean(xs: &[Decimal]) -> Decimal {
    if xs.is_empty() {
        return Decimal::ZERO;
    }
    cents(xs.iter().sum::<Decimal>() / Decimal::from(xs.len()))
}

/// Distinct keys in order of first appearance.
fn distinct<K: PartialEq + Clone>(keys: impl Iterator<Item = K>) -> Vec<K> {
    let mut out: Vec<K> = Vec::new();
    for k in keys {
        if !out.contains(&k) {
            out.push(k);
        }
    }
    out
}

type RowKey = (ReportMarket, String, Strategy);

struct Grid<'a> {
    pairs: Vec<QuantilePair>,
    rows: Vec<RowKey>,
    cells: &'a [BacktestReport],
}

impl<'a> Grid<'a> {
    fn new(report: &'a SweepReport) -> Self {
        Grid {
            pairs: distinct(report.cells.iter().map(|c| c.pair)),
            rows: distinct(report.cells.iter().map(|c| (c.market, c.model.clone(), c.strategy))),
            cells: &report.cells,
        }
    }

    fn cell(&self, row: &RowKey, pair: QuantilePair) -> Option<&'a BacktestReport> {
        self.cells
            .iter()
            .find(|c| c.market == row.0 && c.model == row.1 && c.strategy == row.2 && c.pair == pair)
    }

    fn row_cells(&self, row: &RowKey) -> Vec<&'a BacktestReport> {
        self.pairs.iter().filter_map(|p| self.cell(row, *p)).collect()
    }

    /// (market, strategy) groups in order of first appearance.
    fn groups(&self) -> Vec<(ReportMarket, Strategy)> {
        distinct(self.rows.iter().map(|(m, _, s)| (*m, *s)))
    }

    fn rows_of(&self, market: ReportMarket, strategy: Strategy) -> Vec<&RowKey> {
        self.rows.iter().filter(|r| r.0 == market && r.2 == strategy).collect()
    }
}

fn opt(x: Option<Decimal>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn sum_opt<'a>(xs: impl Iterator<Item = &'a Option<Decimal>>) -> Option<Decimal> {
    xs.copied().try_fold(Decimal::ZERO, |acc, x| x.map(|v| acc + v))
}

/// One row per cell, then per (market, model, strategy) a `Model Average`
/// row over pairs, then per (market, strategy, pair) an `Average` row over
/// models. Average rows leave the count columns empty.
pub fn write_long_csv<W: Write>(out: W, report: &SweepReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "market",
        "model",
        "strategy",
        "pair",
        "realized_profit",
        "trade_count",
        "pf_profit",
        "dp_profit",
        "windows",
    ])?;
    for c in &report.cells {
        w.write_record([
            c.market.to_string(),
            c.model.clone(),
            c.strategy.to_string(),
            c.pair.label(),
            c.realized_profit.to_string(),
            c.trade_count.to_string(),
            c.pf_profit.to_string(),
            opt(c.dp_profit),
            c.windows.to_string(),
        ])?;
    }
    let grid = Grid::new(report);
    for row in &grid.rows {
        let cells = grid.row_cells(row);
        let realized: Vec<Decimal> = cells.iter().map(|c| c.realized_profit).collect();
        w.write_record([
            row.0.to_string(),
            row.1.clone(),
            row.2.to_string(),
            "Model Average".to_string(),
            mean(&realized).to_string(),
            String::new(),
            cells[0].pf_profit.to_string(),
            opt(cells[0].dp_profit),
            String::new(),
        ])?;
    }
    for (market, strategy) in grid.groups() {
        let rows = grid.rows_of(market, strategy);
        for pair in &grid.pairs {
            let cells: Vec<_> = rows.iter().filter_map(|r| grid.cell(r, *pair)).collect();
            let realized: Vec<Decimal> = cells.iter().map(|c| c.realized_profit).collect();
            let pf: Vec<Decimal> = cells.iter().map(|c| c.pf_profit).collect();
            let dp = sum_opt(cells.iter().map(|c| &c.dp_profit)).map(|s| cents(s / Decimal::from(cells.len())));
            w.write_record([
                market.to_string(),
                "Average".to_string(),
                strategy.to_string(),
                pair.label(),
                mean(&realized).to_string(),
                String::new(),
                mean(&pf).to_string(),
                opt(dp),
                String::new(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Results-table layout: one column per pair, then `PF` and `Model Average`
/// (mean over the pair columns). Each (market, strategy) block ends with an
/// `Average` row over its models.
pub fn write_table_csv<W: Write>(out: W, report: &SweepReport) -> csv::Result<()> {
    let grid = Grid::new(report);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["market".to_string(), "model".to_string(), "strategy".to_string()];
    header.extend(grid.pairs.iter().map(QuantilePair::label));
    header.push("PF".into());
    header.push("Model Average".into());
    w.write_record(&header)?;
    for (market, strategy) in grid.groups() {
        let rows = grid.rows_of(market, strategy);
        let mut columns: Vec<Vec<Decimal>> = vec![Vec::new(); grid.pairs.len() + 2];
        for row in &rows {
            let mut record = vec![market.to_string(), row.1.clone(), strategy.to_string()];
            let mut values = Vec::new();
            for pair in &grid.pairs {
                match grid.cell(row, *pair) {
                    Some(c) => {
                        values.push(c.realized_profit);
                        record.push(c.realized_profit.to_string());
                    }
                    None => record.push(String::new()),
                }
            }
            let cells = grid.row_cells(row);
            let pf = cells[0].pf_profit;
            let avg = mean(&values);
            record.push(pf.to_string());
            record.push(avg.to_string());
            w.write_record(&record)?;
            for (j, pair) in grid.pairs.iter().enumerate() {
                if let Some(c) = grid.cell(row, *pair) {
                    columns[j].push(c.realized_profit);
                }
            }
            columns[grid.pairs.len()].push(pf);
            columns[grid.pairs.len() + 1].push(avg);
        }
        let mut record = vec![market.to_string(), "Average".to_string(), strategy.to_string()];
        record.extend(columns.iter().map(|c| mean(c).to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Per (market, strategy, pair): mean, min and max realized profit over
/// models. A closing `all` row per (market, strategy) spans every model and
/// pair.
pub fn write_plot_csv<W: Write>(out: W, report: &SweepReport) -> csv::Result<()> {
    let grid = Grid::new(report);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["market", "strategy", "pair", "mean", "min", "max"])?;
    let mut emit = |market: ReportMarket, strategy: Strategy, label: String, xs: &[Decimal]| -> csv::Result<()> {
        let lo = xs.iter().min().copied().unwrap_or_default();
        let hi = xs.iter().max().copied().unwrap_or_default();
        w.write_record([market.to_string(), strategy.to_string(), label, mean(xs).to_string(), lo.to_string(), hi.to_string()])
    };
    for (market, strategy) in grid.groups() {
        let rows = grid.rows_of(market, strategy);
        let mut all = Vec::new();
        for pair in &grid.pairs {
            let xs: Vec<Decimal> = rows.iter().filter_map(|r| grid.cell(r, *pair)).map(|c| c.realized_profit).collect();
            all.extend_from_slice(&xs);
            emit(market, strategy, pair.label(), &xs)?;
        }
        emit(market, strategy, "all".into(), &all)?;
    }
    w.flush()?;
    Ok(())
}
