//! Experiment configuration: flat `key = value` files, command-line
//! overrides (flags win) and the resolved form written to `manifest.cfg`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use kanvision::data::DatasetName;
use kanvision::model::{format_widths, parse_widths};

use crate::error::{CliError, CliResult};

pub const DEFAULT_EPOCHS: usize = 10;
pub const DEFAULT_LR: f64 = 0.01;
pub const DEFAULT_BATCH: usize = 64;
pub const DEFAULT_SEED: u64 = 42;
/// Training images used when neither `--subset` nor `--full` is given.
pub const DESK_SUBSET: usize = 10_000;

/// Every setting optional; layers merge with later ones winning.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigOverrides {
    pub name: Option<String>,
    pub dataset: Option<DatasetName>,
    pub model: Option<String>,
    pub widths: Option<Vec<usize>>,
    pub grid: Option<usize>,
    pub order: Option<usize>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub subset: Option<usize>,
    pub full: Option<bool>,
    pub resize: Option<(usize, usize)>,
    pub out_dir: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub registry: Option<PathBuf>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("invalid value `{value}` for `{key}`")))
}

pub fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("invalid boolean `{value}` for `{key}`"))),
    }
}

/// `28x28` or `28`.
pub fn parse_resize(value: &str) -> CliResult<(usize, usize)> {
    let parts: Vec<&str> = value.split('x').collect();
    match parts[..] {
        [s] => {
            let n = parse("resize", s)?;
            Ok((n, n))
        }
        [h, w] => Ok((parse("resize", h)?, parse("resize", w)?)),
        _ => Err(CliError::Config(format!("invalid resize `{value}` (expected HxW)"))),
    }
}

pub fn parse_usize_list(key: &str, value: &str) -> CliResult<Vec<usize>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl ConfigOverrides {
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "name" => self.name = Some(value.to_string()),
            "dataset" => {
                self.dataset = Some(value.parse().map_err(|e: kanvision::error::DataError| CliError::Config(e.to_string()))?)
            }
            "model" => self.model = Some(value.to_string()),
            "widths" => {
                self.widths = Some(parse_widths(value).map_err(|e| CliError::Config(e.to_string()))?)
            }
            "grid" => self.grid = Some(parse("grid", value)?),
            "order" => self.order = Some(parse("order", value)?),
            "epochs" => self.epochs = Some(parse("epochs", value)?),
            "lr" | "learning_rate" => self.lr = Some(parse("lr", value)?),
            "batch_size" => self.batch_size = Some(parse("batch_size", value)?),
            "seed" => self.seed = Some(parse("seed", value)?),
            "subset" => {
                self.subset = match value {
                    "" | "none" => None,
                    v => Some(parse("subset", v)?),
                }
            }
            "full" => self.full = Some(parse_bool("full", value)?),
            "resize" => {
                self.resize = match value {
                    "" | "none" => None,
                    v => Some(parse_resize(v)?),
                }
            }
            "out_dir" => self.out_dir = Some(PathBuf::from(value)),
            "cache_dir" => self.cache_dir = Some(PathBuf::from(value)),
            "workers" => self.workers = Some(parse("workers", value)?),
            "registry" => self.registry = Some(PathBuf::from(value)),
            // Informational keys written into manifests.
            "version" | "params" | "train_size" | "test_size" => {}
            other => return Err(CliError::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_text(text: &str) -> CliResult<Self> {
        let mut out = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got `{line}`", i + 1)))?;
            out.set(key, value)?;
        }
        Ok(out)
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse_text(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merge(mut self, other: ConfigOverrides) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            name, dataset, model, widths, grid, order, epochs, lr, batch_size, seed, subset, full, resize, out_dir,
            cache_dir, workers, registry
        );
        self
    }

    /// Fills unset fields from `defaults`.
    pub fn or(self, defaults: ConfigOverrides) -> Self {
        defaults.merge(self)
    }

    pub fn resolve(self) -> CliResult<ExperimentConfig> {
        let cfg = ExperimentConfig {
            name: self.name,
            dataset: self.dataset.unwrap_or(DatasetName::Mnist),
            model: self.model.unwrap_or_else(|| "efficient_kan".to_string()),
            widths: self.widths,
            grid: self.grid,
            order: self.order,
            epochs: self.epochs.unwrap_or(DEFAULT_EPOCHS),
            lr: self.lr.unwrap_or(DEFAULT_LR),
            batch_size: self.batch_size.unwrap_or(DEFAULT_BATCH),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            subset: self.subset,
            full: self.full.unwrap_or(false),
            resize: self.resize,
            out_dir: self.out_dir.unwrap_or_else(|| PathBuf::from("runs")),
            cache_dir: self.cache_dir.unwrap_or_else(default_cache_dir),
            workers: self.workers.unwrap_or(1).max(1),
            registry: self.registry,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `$KANVISION_CACHE` when set, otherwise `./data`.
pub fn default_cache_dir() -> PathBuf {
    kanvision::data::DataCache::from_env_or("data").root().to_path_buf()
}

/// A fully resolved experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub dataset: DatasetName,
    /// Registry entry or model kind.
    pub model: String,
    pub widths: Option<Vec<usize>>,
    pub grid: Option<usize>,
    pub order: Option<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub subset: Option<usize>,
    pub full: bool,
    pub resize: Option<(usize, usize)>,
    pub out_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub workers: usize,
    pub registry: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(CliError::Config(format!("learning rate {} must be finite and >= 0", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(CliError::Config("batch_size must be positive".into()));
        }
        if self.subset == Some(0) {
            return Err(CliError::Config("subset must be positive".into()));
        }
        if self.full && self.subset.is_some() {
            return Err(CliError::Config("`full` and `subset` are mutually exclusive".into()));
        }
        if let Some((h, w)) = self.resize {
            if h == 0 || w == 0 {
                return Err(CliError::Config("resize dimensions must be positive".into()));
            }
        }
        Ok(())
    }

    /// Number of training images to draw, `None` meaning the whole split.
    pub fn train_subset(&self) -> Option<usize> {
        if self.full {
            None
        } else {
            Some(self.subset.unwrap_or(DESK_SUBSET))
        }
    }

    /// Everything needed to replay the run, in `key = value` form.
    /// Paths for output and cache are deliberately left out so a manifest
    /// replays identically from any working directory.
    pub fn to_manifest(&self) -> String {
        let mut s = String::new();
        if let Some(n) = &self.name {
            writeln!(s, "name = {n}").unwrap();
        }
        writeln!(s, "dataset = {}", self.dataset).unwrap();
        writeln!(s, "model = {}", self.model).unwrap();
        if let Some(w) = &self.widths {
            writeln!(s, "widths = {}", format_widths(w)).unwrap();
        }
        if let Some(g) = self.grid {
            writeln!(s, "grid = {g}").unwrap();
        }
        if let Some(k) = self.order {
            writeln!(s, "order = {k}").unwrap();
        }
        writeln!(s, "epochs = {}", self.epochs).unwrap();
        writeln!(s, "lr = {}", self.lr).unwrap();
        writeln!(s, "batch_size = {}", self.batch_size).unwrap();
        writeln!(s, "seed = {}", self.seed).unwrap();
        match self.train_subset() {
            Some(n) => writeln!(s, "subset = {n}").unwrap(),
            None => writeln!(s, "full = true").unwrap(),
        }
        if let Some((h, w)) = self.resize {
            writeln!(s, "resize = {h}x{w}").unwrap();
        }
        if let Some(r) = &self.registry {
            writeln!(s, "registry = {}", r.display()).unwrap();
        }
        s
    }
}
