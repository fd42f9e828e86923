//! `sweep`: train one model per (grid, order) cell and collect the results
//! in `sweep.csv`. Each finished cell is flushed immediately, so an
//! interrupted sweep resumes where it stopped; the file is rewritten in
//! cell order at the end, making a resumed sweep's output identical to an
//! uninterrupted one.

use std::collections::BTreeMap;
use std::fs;

use crate::config::{parse_usize_list, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::records::{append_row, read_rows, write_rows, SweepRow, SWEEP_HEADER};
use crate::run::{ensure_dir, is_registry_model, load_splits, parallel_map, resolve_spec, train_model};

pub const DEFAULT_GRIDS: [usize; 5] = [1, 2, 3, 5, 8];
pub const DEFAULT_ORDERS: [usize; 4] = [1, 2, 3, 5];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SweepGrid {
    pub grids: Vec<usize>,
    pub orders: Vec<usize>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            grids: DEFAULT_GRIDS.to_vec(),
            orders: DEFAULT_ORDERS.to_vec(),
        }
    }
}

impl SweepGrid {
    pub fn parse(grids: Option<&str>, orders: Option<&str>) -> CliResult<Self> {
        let mut s = Self::default();
        if let Some(g) = grids {
            s.grids = parse_usize_list("grids", g)?;
        }
        if let Some(k) = orders {
            s.orders = parse_usize_list("orders", k)?;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> CliResult<()> {
        for (name, values) in [("grids", &self.grids), ("orders", &self.orders)] {
            if values.is_empty() || values.contains(&0) {
                return Err(CliError::Config(format!("{name} must be a non-empty list of values >= 1")));
            }
            let mut sorted = values.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != values.len() {
                return Err(CliError::Config(format!("{name} {values:?} repeats a value")));
            }
        }
        Ok(())
    }

    /// Cartesian product in row-major (grid, order) order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.grids
            .iter()
            .flat_map(|&g| self.orders.iter().map(move |&k| (g, k)))
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SweepOptions {
    pub grid: SweepGrid,
    /// Stop after this many newly trained cells (for staged runs).
    pub max_cells: Option<usize>,
    pub verbose: bool,
}

fn sweep_manifest(cfg: &ExperimentConfig, grid: &SweepGrid) -> String {
    let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    format!(
        "{}grids = {}\norders = {}\n",
        cfg.to_manifest(),
        list(&grid.grids),
        list(&grid.orders)
    )
}

/// Runs the missing cells and returns every row in cell order. The result
/// is complete only when `max_cells` did not cut the run short.
pub fn run_sweep(cfg: &ExperimentConfig, opts: &SweepOptions) -> CliResult<Vec<SweepRow>> {
    opts.grid.validate()?;
    ensure_dir(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("sweep.csv");
    let manifest_path = cfg.out_dir.join("sweep.cfg");
    let manifest = sweep_manifest(cfg, &opts.grid);
    match fs::read_to_string(&manifest_path) {
        Ok(existing) if existing != manifest && csv_path.exists() => {
            return Err(CliError::Config(format!(
                "{} holds a sweep with a different configuration; use another --out-dir",
                cfg.out_dir.display()
            )))
        }
        _ => fs::write(&manifest_path, &manifest).map_err(|e| CliError::io(&manifest_path, e))?,
    }

    let mut done: BTreeMap<(usize, usize), SweepRow> = BTreeMap::new();
    for rec in read_rows(&csv_path, &SWEEP_HEADER)? {
        let row = SweepRow::from_record(&rec)?;
        done.insert((row.grid, row.order), row);
    }
    let mut pending: Vec<(usize, usize)> = opts.grid.cells().into_iter().filter(|c| !done.contains_key(c)).collect();
    if let Some(n) = opts.max_cells {
        pending.truncate(n);
    }

    if !pending.is_empty() {
        let splits = load_splits(cfg)?;
        let input = splits.train.image_shape();
        // Resolve every cell first so a bad spec fails before any training.
        let specs = pending
            .iter()
            .map(|&(g, k)| {
                let mut c = cfg.clone();
                c.grid = Some(g);
                c.order = Some(k);
                if c.widths.is_none() && !is_registry_model(cfg)? {
                    c.widths = Some(vec![input.iter().product(), 32, 10]);
                }
                resolve_spec(&c, input).map(|s| (c, s))
            })
            .collect::<CliResult<Vec<_>>>()?;
        if !specs.iter().all(|(_, s)| s.kind.uses_splines()) {
            return Err(CliError::Config(format!("model `{}` has no splines to sweep", cfg.model)));
        }
        let results = parallel_map(cfg.workers, &specs, |(c, spec)| -> CliResult<SweepRow> {
            let outcome = train_model(c, spec, &splits, opts.verbose)?;
            let row = SweepRow {
                grid: spec.grid,
                order: spec.order,
                params: outcome.params(),
                test_accuracy: outcome.evaluation.accuracy,
                test_loss: outcome.evaluation.mean_loss,
                final_train_loss: outcome.epochs.last().map(|e| e.mean_loss),
            };
            append_row(&csv_path, &SWEEP_HEADER, &row.to_record())?;
            Ok(row)
        });
        for r in results {
            let row = r?;
            done.insert((row.grid, row.order), row);
        }
    }

    let rows: Vec<SweepRow> = opts
        .grid
        .cells()
        .into_iter()
        .filter_map(|c| done.get(&c).cloned())
        .collect();
    let records: Vec<Vec<String>> = rows.iter().map(|r| r.to_record()).collect();
    write_rows(&csv_path, &SWEEP_HEADER, &records)?;
    Ok(rows)
}

/// Accuracy table with grids as rows and orders as columns.
pub fn format_heatmap(grid: &SweepGrid, rows: &[SweepRow], value: impl Fn(&SweepRow) -> String) -> String {
    let mut s = format!("{:>6}", "G\\k");
    for k in &grid.orders {
        s.push_str(&format!("{k:>10}"));
    }
    s.push('\n');
    for g in &grid.grids {
        s.push_str(&format!("{g:>6}"));
        for k in &grid.orders {
            let cell = rows
                .iter()
                .find(|r| r.grid == *g && r.order == *k)
                .map(&value)
                .unwrap_or_else(|| "-".into());
            s.push_str(&format!("{cell:>10}"));
        }
        s.push('\n');
    }
    s
}
