use std::path::Path;

use bessarb::evaluation::{run_sweep, write_long_csv, write_plot_csv, write_table_csv, SweepOptions};

use super::{csv_bytes, load_dataset, load_spec, pair_rule, parse_dataset_spec, parse_pairs, parse_strategies, write_file, write_json};
use crate::config::Settings;
use crate::error::Result;

pub fn run(s: &Settings, out: &Path) -> Result<()> {
    let spec = load_spec(&s.battery)?;
    let strategies = parse_strategies(&s.strategies)?;
    let pairs = parse_pairs(&s.pairs)?;
    let opts = SweepOptions {
        rule: pair_rule(s)?,
        carry_state: s.carry_state.unwrap_or(false),
        jobs: s.jobs.unwrap_or(0),
        ..SweepOptions::new(strategies, pairs, spec)
    };
    let datasets = match &s.datasets {
        Some(list) => list.iter().map(|d| parse_dataset_spec(d)).collect::<Result<Vec<_>>>()?,
        None => vec![load_dataset(s)?],
    };
    let report = run_sweep(&datasets, &opts)?;
    let format = s.format();
    if format.json() {
        write_json(out, "sweep.json", &report)?;
    }
    if format.csv() {
        write_file(out, "sweep_cells.csv", &csv_bytes(|b| write_long_csv(b, &report))?)?;
        write_file(out, "sweep_table.csv", &csv_bytes(|b| write_table_csv(b, &report))?)?;
        write_file(out, "sweep_plot.csv", &csv_bytes(|b| write_plot_csv(b, &report))?)?;
    }
    let windows: usize = datasets.iter().map(|d| d.windows()).sum();
    emit!("cells={} datasets={} windows={windows}", report.cells.len(), datasets.len());
    Ok(())
}
