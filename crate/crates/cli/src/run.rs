//! Single training runs: data loading, model resolution, the epoch loop and
//! the files a run leaves behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use kanvision::data::{DataCache, Dataset, Split};
use kanvision::model::{format_widths, parse_registry, save_checkpoint, ModelKind, ModelSpec};
use kanvision::train::{evaluate, train_epoch, EpochStats, Evaluation};
use kanvision::{Model64, Sgd64};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::records::{append_row, ResultRow, RESULTS_HEADER};

/// Train and test splits as a run sees them (resized and subset).
#[derive(Clone, Debug)]
pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn load_split(cfg: &ExperimentConfig, split: Split) -> CliResult<Dataset> {
    let cache = DataCache::new(&cfg.cache_dir);
    let mut ds = cache.load(cfg.dataset, split)?;
    if let Some((h, w)) = cfg.resize {
        ds = ds.resize(h, w)?;
    }
    Ok(ds)
}

pub fn load_splits(cfg: &ExperimentConfig) -> CliResult<Splits> {
    let mut train = load_split(cfg, Split::Train)?;
    if let Some(n) = cfg.train_subset() {
        if n < train.len() {
            train = train.subset(n, cfg.seed)?;
        }
    }
    let test = load_split(cfg, Split::Test)?;
    Ok(Splits { train, test })
}

fn lookup_registry(cfg: &ExperimentConfig) -> CliResult<Option<ModelSpec>> {
    if let Some(path) = &cfg.registry {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let specs = parse_registry(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(s) = specs.into_iter().find(|s| s.name == cfg.model) {
            return Ok(Some(s));
        }
    }
    Ok(kanvision::model::builtin(&cfg.model))
}

/// Resolves the configured model against the per-sample input shape of the
/// data it will see.
pub fn resolve_spec(cfg: &ExperimentConfig, input: [usize; 3]) -> CliResult<ModelSpec> {
    let input_len: usize = input.iter().product();
    let mut spec = match lookup_registry(cfg)? {
        Some(mut spec) => {
            if spec.input != input {
                return Err(CliError::Config(format!(
                    "model `{}` expects {}x{}x{} input but {} provides {}x{}x{} (see --resize)",
                    spec.name, spec.input[0], spec.input[1], spec.input[2], cfg.dataset, input[0], input[1], input[2]
                )));
            }
            if let Some(w) = &cfg.widths {
                spec.widths = w.clone();
            }
            spec
        }
        None => {
            let kind: ModelKind = cfg.model.parse().map_err(|e: kanvision::Error| CliError::Config(e.to_string()))?;
            if kind.has_conv() {
                let names: Vec<String> = kanvision::model::builtin_specs().into_iter().map(|s| s.name).collect();
                return Err(CliError::Config(format!(
                    "`{kind}` needs conv stages: use a registry entry ({}) or --registry FILE",
                    names.join(", ")
                )));
            }
            let widths = cfg.widths.clone().unwrap_or_else(|| vec![input_len, 64, 10]);
            let mut spec = ModelSpec::dense(kind, &widths);
            spec.name = cfg.model.clone();
            spec.input = input;
            spec
        }
    };
    if let Some(g) = cfg.grid {
        spec.grid = g;
    }
    if let Some(k) = cfg.order {
        spec.order = k;
    }
    spec.seed = cfg.seed;
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(spec)
}

pub fn run_name(cfg: &ExperimentConfig, spec: &ModelSpec) -> String {
    if let Some(n) = &cfg.name {
        return n.clone();
    }
    let mut name = spec.name.clone();
    if !spec.kind.has_conv() {
        let w: Vec<String> = spec.widths.iter().map(|w| w.to_string()).collect();
        name.push('-');
        name.push_str(&w.join("x"));
    }
    name.push_str(&format!("-{}", cfg.dataset));
    if spec.kind.uses_splines() {
        name.push_str(&format!("-g{}k{}", spec.grid, spec.order));
    }
    name.push_str(&format!("-e{}-s{}", cfg.epochs, cfg.seed));
    name
}

#[derive(Debug)]
pub struct RunOutcome {
    pub name: String,
    pub spec: ModelSpec,
    pub model: Model64,
    pub epochs: Vec<EpochStats>,
    pub evaluation: Evaluation,
    pub train_size: usize,
    pub wall_seconds: f64,
}

impl RunOutcome {
    pub fn params(&self) -> usize {
        self.model.audit().total
    }

    pub fn row(&self, cfg: &ExperimentConfig) -> ResultRow {
        ResultRow {
            run: self.name.clone(),
            dataset: cfg.dataset.to_string(),
            model: cfg.model.clone(),
            kind: self.spec.kind.to_string(),
            widths: format_widths(&self.spec.widths),
            grid: self.spec.grid,
            order: self.spec.order,
            epochs: cfg.epochs,
            lr: cfg.lr,
            batch_size: cfg.batch_size,
            seed: cfg.seed,
            train_size: self.train_size,
            test_size: self.evaluation.total,
            params: self.params(),
            final_train_loss: self.epochs.last().map(|e| e.mean_loss),
            test_loss: self.evaluation.mean_loss,
            test_accuracy: self.evaluation.accuracy,
            epoch_losses: self.epochs.iter().map(|e| e.mean_loss).collect(),
        }
    }
}

/// Evaluation batch size; does not affect results, only memory use.
const EVAL_BATCH: usize = 500;

/// Builds, trains and evaluates one model. Progress goes to stderr when
/// `verbose` is set.
pub fn train_model(cfg: &ExperimentConfig, spec: &ModelSpec, splits: &Splits, verbose: bool) -> CliResult<RunOutcome> {
    let name = run_name(cfg, spec);
    let start = Instant::now();
    let mut model = Model64::build(spec)?;
    let mut sgd = Sgd64::new(cfg.lr)?;
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for e in 0..cfg.epochs {
        let stats = train_epoch(&mut model, &mut sgd, &splits.train, cfg.batch_size, cfg.seed, e)?;
        if verbose {
            eprintln!(
                "[{name}] epoch {}/{}: loss {:.4}, train accuracy {:.4} ({:.1}s)",
                e + 1,
                cfg.epochs,
                stats.mean_loss,
                stats.train_accuracy,
                start.elapsed().as_secs_f64()
            );
        }
        epochs.push(stats);
    }
    let evaluation = evaluate(&model, &splits.test, EVAL_BATCH)?;
    if verbose {
        eprintln!(
            "[{name}] test accuracy {:.4} ({}/{}), loss {:.4}",
            evaluation.accuracy, evaluation.correct, evaluation.total, evaluation.mean_loss
        );
    }
    Ok(RunOutcome {
        name,
        spec: spec.clone(),
        model,
        epochs,
        evaluation,
        train_size: splits.train.len(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Writes `<out>/<run>/{manifest.cfg, model.ckpt, epochs.csv}` and appends
/// to `<out>/results.csv` and `<out>/timings.csv`. Returns the run directory.
pub fn record_run(cfg: &ExperimentConfig, outcome: &RunOutcome) -> CliResult<PathBuf> {
    let dir = cfg.out_dir.join(&outcome.name);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let manifest = dir.join("manifest.cfg");
    let mut text = format!("# kanvision {} run manifest\n", env!("CARGO_PKG_VERSION"));
    text.push_str(&cfg.to_manifest());
    text.push_str("\n# resolved model\n");
    for line in outcome.spec.to_stanza().lines() {
        text.push_str("#   ");
        text.push_str(line);
        text.push('\n');
    }
    fs::write(&manifest, text).map_err(|e| CliError::io(&manifest, e))?;
    save_checkpoint(&outcome.model, &dir.join("model.ckpt"))?;

    let epochs_path = dir.join("epochs.csv");
    let records: Vec<Vec<String>> = outcome
        .epochs
        .iter()
        .map(|e| vec![(e.epoch + 1).to_string(), e.mean_loss.to_string(), e.train_accuracy.to_string()])
        .collect();
    crate::records::write_rows(&epochs_path, &["epoch", "train_loss", "train_accuracy"], &records)?;

    append_row(&cfg.out_dir.join("results.csv"), &RESULTS_HEADER, &outcome.row(cfg).to_record())?;
    append_row(
        &cfg.out_dir.join("timings.csv"),
        &["run", "wall_seconds"],
        &[outcome.name.clone(), format!("{:.3}", outcome.wall_seconds)],
    )?;
    Ok(dir)
}

/// Maps `f` over `items` on up to `workers` threads, preserving order.
pub fn parallel_map<I, O, F>(workers: usize, items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<O>> = (0..items.len()).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let out = f(&items[i]);
                results.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(out);
            });
        }
    });
    slots.into_iter().map(|o| o.expect("every item processed")).collect()
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Whether `cfg.model` names a registry entry rather than a bare kind.
pub fn is_registry_model(cfg: &ExperimentConfig) -> CliResult<bool> {
    Ok(lookup_registry(cfg)?.is_some())
}
