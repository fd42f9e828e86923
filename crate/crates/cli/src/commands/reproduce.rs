//! `reproduce`: fixed suites of runs compared against published accuracies
//! and parameter counts. Writes `<out>/<suite>.csv` and `<out>/<suite>.md`;
//! any asserted row outside its band turns into an acceptance failure.

use std::fmt::Write as _;
use std::fs;
use std::str::FromStr;

use kanvision::model::format_widths;

use crate::config::{ConfigOverrides, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::records::{write_rows, REPRODUCE_HEADER};
use crate::run::{ensure_dir, load_splits, parallel_map, record_run, resolve_spec, train_model};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Table2,
    Table3,
    Figure4,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Table2 => "table2",
            Suite::Table3 => "table3",
            Suite::Figure4 => "figure4",
        }
    }

    /// Protocol defaults; anything set on the command line wins.
    pub fn defaults(self, user: &ConfigOverrides) -> ConfigOverrides {
        let mut d = ConfigOverrides {
            epochs: Some(10),
            batch_size: Some(64),
            seed: Some(42),
            ..Default::default()
        };
        match self {
            Suite::Table2 | Suite::Table3 => {
                d.lr = Some(0.01);
                if user.subset.is_none() {
                    d.full = Some(true);
                }
            }
            Suite::Figure4 => d.lr = Some(0.05),
        }
        d
    }

    pub fn rows(self, input_len: usize) -> Vec<SuiteRow> {
        match self {
            Suite::Table2 => {
                let mut rows = Vec::new();
                for (kind, published) in [("efficient_kan", [0.945, 0.962, 0.973]), ("mlp", [0.942, 0.966, 0.973])] {
                    for (hidden, acc) in [16, 32, 64].into_iter().zip(published) {
                        rows.push(SuiteRow::dense(kind, vec![input_len, hidden, 10]).accuracy(acc, (acc - 0.02, acc + 0.02)));
                    }
                }
                rows
            }
            Suite::Table3 => vec![
                SuiteRow::registry("cnn_small", 34_000.0, 0.979).band(0.970, 1.0),
                SuiteRow::registry("cnn_medium", 157_000.0, 0.991),
                SuiteRow::registry("kan_conv_mlp1", 7_400.0, 0.9853),
                SuiteRow::registry("kan_conv_mlp2", 163_700.0, 0.9858),
                SuiteRow::registry("kan_conv_kan", 94_200.0, 0.989).band(0.975, 1.0),
                SuiteRow::registry("cnn_kan", 95_000.0, 0.9875),
            ],
            Suite::Figure4 => {
                let mut rows = Vec::new();
                for kind in ["efficient_kan", "mlp"] {
                    for hidden in [vec![32], vec![64], vec![64, 32]] {
                        let mut widths = vec![input_len];
                        widths.extend(hidden);
                        widths.push(10);
                        rows.push(SuiteRow::dense(kind, widths));
                    }
                }
                rows
            }
        }
    }
}

impl FromStr for Suite {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "table2" => Ok(Suite::Table2),
            "table3" => Ok(Suite::Table3),
            "figure4" => Ok(Suite::Figure4),
            other => Err(CliError::Config(format!("unknown suite `{other}` (table2, table3, figure4)"))),
        }
    }
}

/// One planned run of a suite and what it is compared against.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteRow {
    pub id: String,
    pub model: String,
    pub widths: Option<Vec<usize>>,
    pub published_params: Option<f64>,
    pub published_accuracy: Option<f64>,
    pub band: Option<(f64, f64)>,
}

/// Relative tolerance on parameter counts.
pub const PARAM_TOLERANCE: f64 = 0.10;

impl SuiteRow {
    fn dense(kind: &str, widths: Vec<usize>) -> Self {
        Self {
            id: format!("{kind}_{}", widths.iter().map(|w| w.to_string()).collect::<Vec<_>>().join("x")),
            model: kind.to_string(),
            widths: Some(widths),
            published_params: None,
            published_accuracy: None,
            band: None,
        }
    }

    fn registry(name: &str, params: f64, accuracy: f64) -> Self {
        Self {
            id: name.to_string(),
            model: name.to_string(),
            widths: None,
            published_params: Some(params),
            published_accuracy: Some(accuracy),
            band: None,
        }
    }

    fn accuracy(mut self, accuracy: f64, band: (f64, f64)) -> Self {
        self.published_accuracy = Some(accuracy);
        self.band = Some(band);
        self
    }

    fn band(mut self, lo: f64, hi: f64) -> Self {
        self.band = Some((lo, hi));
        self
    }

    pub fn asserted(&self) -> bool {
        self.band.is_some() || self.published_params.is_some()
    }

    /// Checks a measurement, returning the verdict and a short reason.
    pub fn judge(&self, params: usize, accuracy: f64) -> (bool, String) {
        let mut notes = Vec::new();
        if let Some(p) = self.published_params {
            let rel = (params as f64 - p).abs() / p;
            if rel > PARAM_TOLERANCE {
                notes.push(format!("params off by {:.1}%", rel * 100.0));
            }
        }
        if let Some((lo, hi)) = self.band {
            if !(lo..=hi).contains(&accuracy) {
                notes.push(format!("accuracy {accuracy:.4} outside [{lo:.3}, {hi:.3}]"));
            }
        }
        if !self.asserted() {
            return (true, "reported only".into());
        }
        (notes.is_empty(), notes.join("; "))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReproduceRow {
    pub suite: Suite,
    pub planned: SuiteRow,
    pub widths: Vec<usize>,
    pub params: usize,
    pub accuracy: f64,
    pub pass: bool,
    pub note: String,
}

impl ReproduceRow {
    pub fn to_record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.suite.name().to_string(),
            self.planned.id.clone(),
            self.planned.model.clone(),
            format_widths(&self.widths),
            self.params.to_string(),
            opt(self.planned.published_params),
            self.accuracy.to_string(),
            opt(self.planned.published_accuracy),
            opt(self.planned.band.map(|b| b.0)),
            opt(self.planned.band.map(|b| b.1)),
            self.planned.asserted().to_string(),
            self.pass.to_string(),
            self.note.clone(),
        ]
    }
}

pub fn markdown_summary(suite: Suite, cfg: &ExperimentConfig, rows: &[ReproduceRow]) -> String {
    let mut s = String::new();
    writeln!(s, "# {} reproduction\n", suite.name()).unwrap();
    writeln!(
        s,
        "{} on {} training images, {} epochs, lr {}, batch {}, seed {}.\n",
        cfg.dataset,
        rows.first().map(|_| match cfg.train_subset() {
            Some(n) => n.to_string(),
            None => "all".into(),
        }).unwrap_or_default(),
        cfg.epochs,
        cfg.lr,
        cfg.batch_size,
        cfg.seed
    )
    .unwrap();
    writeln!(s, "| row | params | published params | accuracy | published | band | result |").unwrap();
    writeln!(s, "|---|---:|---:|---:|---:|---|---|").unwrap();
    for r in rows {
        let opt = |v: Option<f64>, digits: usize| v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "-".into());
        let band = r.planned.band.map(|(lo, hi)| format!("[{lo:.3}, {hi:.3}]")).unwrap_or_else(|| "-".into());
        let verdict = if !r.planned.asserted() {
            "report".to_string()
        } else if r.pass {
            "PASS".to_string()
        } else {
            format!("FAIL ({})", r.note)
        };
        writeln!(
            s,
            "| {} | {} | {} | {:.4} | {} | {} | {} |",
            r.planned.id,
            r.params,
            opt(r.planned.published_params, 0),
            r.accuracy,
            opt(r.planned.published_accuracy, 4),
            band,
            verdict
        )
        .unwrap();
    }
    s
}

/// Runs a suite and writes its CSV and markdown summary, whatever the
/// verdicts.
pub fn run_suite(
    suite: Suite,
    overrides: ConfigOverrides,
    only: Option<&[String]>,
    verbose: bool,
) -> CliResult<Vec<ReproduceRow>> {
    let defaults = suite.defaults(&overrides);
    let cfg = overrides.or(defaults).resolve()?;
    let splits = load_splits(&cfg)?;
    let input = splits.train.image_shape();

    let mut planned = suite.rows(input.iter().product());
    if let Some(ids) = only {
        if let Some(bad) = ids.iter().find(|id| !planned.iter().any(|r| &r.id == *id)) {
            let known: Vec<&str> = planned.iter().map(|r| r.id.as_str()).collect();
            return Err(CliError::Config(format!("{} has no row `{bad}` ({})", suite.name(), known.join(", "))));
        }
        planned.retain(|r| ids.contains(&r.id));
    }

    let run_dir = cfg.out_dir.join(suite.name());
    ensure_dir(&run_dir)?;
    let jobs = planned
        .iter()
        .map(|row| {
            let mut c = cfg.clone();
            c.model = row.model.clone();
            c.widths = row.widths.clone();
            c.out_dir = run_dir.clone();
            resolve_spec(&c, input).map(|spec| (row.clone(), c, spec))
        })
        .collect::<CliResult<Vec<_>>>()?;

    let results = parallel_map(cfg.workers, &jobs, |(row, c, spec)| -> CliResult<ReproduceRow> {
        let outcome = train_model(c, spec, &splits, verbose)?;
        record_run(c, &outcome)?;
        let params = outcome.params();
        let (pass, note) = row.judge(params, outcome.evaluation.accuracy);
        Ok(ReproduceRow {
            suite,
            planned: row.clone(),
            widths: spec.widths.clone(),
            params,
            accuracy: outcome.evaluation.accuracy,
            pass,
            note,
        })
    });
    let rows = results.into_iter().collect::<CliResult<Vec<_>>>()?;

    let csv_path = cfg.out_dir.join(format!("{}.csv", suite.name()));
    let records: Vec<Vec<String>> = rows.iter().map(|r| r.to_record()).collect();
    write_rows(&csv_path, &REPRODUCE_HEADER, &records)?;
    let md_path = cfg.out_dir.join(format!("{}.md", suite.name()));
    let summary = markdown_summary(suite, &cfg, &rows);
    fs::write(&md_path, &summary).map_err(|e| CliError::io(&md_path, e))?;
    print!("{summary}");
    Ok(rows)
}

/// [`run_suite`], turning any failed row into an acceptance error.
pub fn run_reproduce(
    suite: Suite,
    overrides: ConfigOverrides,
    only: Option<&[String]>,
    verbose: bool,
) -> CliResult<Vec<ReproduceRow>> {
    let rows = run_suite(suite, overrides.clone(), only, verbose)?;
    let out_dir = overrides.out_dir.unwrap_or_else(|| "runs".into());
    let md_path = out_dir.join(format!("{}.md", suite.name()));
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.planned.id.as_str()).collect();
    if failed.is_empty() {
        Ok(rows)
    } else {
        Err(CliError::Acceptance(format!(
            "{} rows outside their bands: {} (see {})",
            suite.name(),
            failed.join(", "),
            md_path.display()
        )))
    }
}
