//! CSV schemas. Headers are fixed; every row written here parses back with
//! the matching `from_record`.

use std::fs::{self, OpenOptions};
use std::path::Path;
use std::sync::Mutex;

use crate::error::{CliError, CliResult};

/// Serialises appends from concurrent workers.
static APPEND_LOCK: Mutex<()> = Mutex::new(());

pub const RESULTS_HEADER: [&str; 18] = [
    "run",
    "dataset",
    "model",
    "kind",
    "widths",
    "grid",
    "order",
    "epochs",
    "lr",
    "batch_size",
    "seed",
    "train_size",
    "test_size",
    "params",
    "final_train_loss",
    "test_loss",
    "test_accuracy",
    "epoch_losses",
];

/// One `results.csv` row. Wall-clock time lives in `timings.csv` so that
/// replayed runs produce byte-identical result rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub run: String,
    pub dataset: String,
    pub model: String,
    pub kind: String,
    pub widths: String,
    pub grid: usize,
    pub order: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub params: usize,
    pub final_train_loss: Option<f64>,
    pub test_loss: f64,
    pub test_accuracy: f64,
    pub epoch_losses: Vec<f64>,
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, name: &str) -> CliResult<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CliError::Data(format!("bad `{name}` field in {rec:?}")))
}

impl ResultRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.run.clone(),
            self.dataset.clone(),
            self.model.clone(),
            self.kind.clone(),
            self.widths.clone(),
            self.grid.to_string(),
            self.order.to_string(),
            self.epochs.to_string(),
            self.lr.to_string(),
            self.batch_size.to_string(),
            self.seed.to_string(),
            self.train_size.to_string(),
            self.test_size.to_string(),
            self.params.to_string(),
            self.final_train_loss.map(|l| l.to_string()).unwrap_or_default(),
            self.test_loss.to_string(),
            self.test_accuracy.to_string(),
            self.epoch_losses.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(";"),
        ]
    }

    pub fn from_record(rec: &csv::StringRecord) -> CliResult<Self> {
        if rec.len() != RESULTS_HEADER.len() {
            return Err(CliError::Data(format!("results row has {} fields", rec.len())));
        }
        let losses = &rec[17];
        Ok(Self {
            run: rec[0].to_string(),
            dataset: rec[1].to_string(),
            model: rec[2].to_string(),
            kind: rec[3].to_string(),
            widths: rec[4].to_string(),
            grid: field(rec, 5, "grid")?,
            order: field(rec, 6, "order")?,
            epochs: field(rec, 7, "epochs")?,
            lr: field(rec, 8, "lr")?,
            batch_size: field(rec, 9, "batch_size")?,
            seed: field(rec, 10, "seed")?,
            train_size: field(rec, 11, "train_size")?,
            test_size: field(rec, 12, "test_size")?,
            params: field(rec, 13, "params")?,
            final_train_loss: if rec[14].is_empty() { None } else { Some(field(rec, 14, "final_train_loss")?) },
            test_loss: field(rec, 15, "test_loss")?,
            test_accuracy: field(rec, 16, "test_accuracy")?,
            epoch_losses: if losses.is_empty() {
                Vec::new()
            } else {
                losses
                    .split(';')
                    .map(|s| s.parse().map_err(|_| CliError::Data(format!("bad epoch loss `{s}`"))))
                    .collect::<CliResult<_>>()?
            },
        })
    }
}

pub const SWEEP_HEADER: [&str; 6] = ["grid", "order", "params", "test_accuracy", "test_loss", "final_train_loss"];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub grid: usize,
    pub order: usize,
    pub params: usize,
    pub test_accuracy: f64,
    pub test_loss: f64,
    pub final_train_loss: Option<f64>,
}

impl SweepRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.grid.to_string(),
            self.order.to_string(),
            self.params.to_string(),
            self.test_accuracy.to_string(),
            self.test_loss.to_string(),
            self.final_train_loss.map(|l| l.to_string()).unwrap_or_default(),
        ]
    }

    pub fn from_record(rec: &csv::StringRecord) -> CliResult<Self> {
        if rec.len() != SWEEP_HEADER.len() {
            return Err(CliError::Data(format!("sweep row has {} fields", rec.len())));
        }
        Ok(Self {
            grid: field(rec, 0, "grid")?,
            order: field(rec, 1, "order")?,
            params: field(rec, 2, "params")?,
            test_accuracy: field(rec, 3, "test_accuracy")?,
            test_loss: field(rec, 4, "test_loss")?,
            final_train_loss: if rec[5].is_empty() { None } else { Some(field(rec, 5, "final_train_loss")?) },
        })
    }
}

pub const BENCH_HEADER: [&str; 11] = [
    "formulation",
    "in",
    "out",
    "grid",
    "order",
    "batch",
    "repeats",
    "forward_ms",
    "backward_ms",
    "peak_live_floats",
    "basis_evaluations",
];

pub const REPRODUCE_HEADER: [&str; 13] = [
    "suite",
    "row",
    "model",
    "widths",
    "params",
    "published_params",
    "measured_accuracy",
    "published_accuracy",
    "band_lo",
    "band_hi",
    "asserted",
    "pass",
    "note",
];

/// Appends one row, writing the header first when the file is new or empty.
pub fn append_row(path: &Path, header: &[&str], record: &[String]) -> CliResult<()> {
    let _guard = APPEND_LOCK.lock().unwrap_or_else(|p| p.into_inner());
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(header).map_err(|e| CliError::csv(path, e))?;
    }
    w.write_record(record).map_err(|e| CliError::csv(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Replaces the file with a header and the given rows.
pub fn write_rows(path: &Path, header: &[&str], records: &[Vec<String>]) -> CliResult<()> {
    let _guard = APPEND_LOCK.lock().unwrap_or_else(|p| p.into_inner());
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    w.write_record(header).map_err(|e| CliError::csv(path, e))?;
    for r in records {
        w.write_record(r).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Data rows of a CSV file after checking its header; a missing file reads
/// as no rows.
pub fn read_rows(path: &Path, header: &[&str]) -> CliResult<Vec<csv::StringRecord>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    let found = r.headers().map_err(|e| CliError::csv(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(CliError::Data(format!(
            "{}: unexpected header {:?}",
            path.display(),
            found.iter().collect::<Vec<_>>()
        )));
    }
    r.records()
        .map(|rec| rec.map_err(|e| CliError::csv(path, e)))
        .collect()
}
