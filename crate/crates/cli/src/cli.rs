//! Argument parsing and verb dispatch.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use kanvision::data::DatasetName;
use kanvision::Model64;

use crate::commands::bench::{run_bench, BenchConfig};
use crate::commands::reproduce::{run_reproduce, Suite};
use crate::commands::sweep::{format_heatmap, run_sweep, SweepGrid, SweepOptions};
use crate::commands::{fetch, train};
use crate::config::{parse_usize_list, ConfigOverrides};
use crate::error::{CliError, CliResult};
use crate::records::{write_rows, BENCH_HEADER};
use crate::run::resolve_spec;

#[derive(Debug, Parser)]
#[command(name = "kanvision", version, about = "Train and compare KAN, MLP and CNN image classifiers")]
pub struct Cli {
    /// Suppress per-epoch progress on stderr.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Populate the data cache (downloads unless --from is given).
    Fetch {
        /// mnist, fashion_mnist or cifar10.
        dataset: String,
        /// Directory that already holds the dataset files (raw or .gz).
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        cache_dir: Option<PathBuf>,
    },
    /// Train one model and record checkpoint, manifest and result row.
    Train(RunArgs),
    /// Evaluate a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Grid x order sweep of a spline model.
    Sweep {
        /// Comma-separated grid sizes (default 1,2,3,5,8).
        #[arg(long)]
        grids: Option<String>,
        /// Comma-separated spline orders (default 1,2,3,5).
        #[arg(long)]
        orders: Option<String>,
        /// Train at most this many new cells, then stop.
        #[arg(long)]
        max_cells: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Time the expanded and matrix KAN formulations.
    Bench {
        /// Layer widths; every consecutive pair is benchmarked.
        #[arg(long, default_value = "784,64")]
        widths: String,
        #[arg(long, default_value_t = 3)]
        grid: usize,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// CSV destination.
        #[arg(long, default_value = "runs/bench.csv")]
        out: PathBuf,
    },
    /// Run a reproduction suite: table2, table3 or figure4.
    Reproduce {
        suite: String,
        /// Comma-separated row ids to run instead of the whole suite.
        #[arg(long)]
        rows: Option<String>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the per-layer parameter audit of a model.
    Audit(RunArgs),
}

/// Experiment settings shared by the training verbs. A `--config` file is
/// read first; flags override it.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub dataset: Option<String>,
    /// Registry entry (e.g. cnn_small) or model kind (efficient_kan, kan, mlp).
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub widths: Option<String>,
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub order: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Training images to draw (default 10000 unless --full).
    #[arg(long)]
    pub subset: Option<String>,
    /// Train on the whole training split.
    #[arg(long)]
    pub full: bool,
    /// Nearest-neighbour resize, e.g. 28x28.
    #[arg(long)]
    pub resize: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<String>,
    #[arg(long)]
    pub workers: Option<String>,
    /// Extra model registry file.
    #[arg(long)]
    pub registry: Option<String>,
}

impl RunArgs {
    pub fn overrides(&self) -> CliResult<ConfigOverrides> {
        let base = match &self.config {
            Some(path) => ConfigOverrides::from_file(path)?,
            None => ConfigOverrides::default(),
        };
        let mut flags = ConfigOverrides::default();
        let pairs = [
            ("name", &self.name),
            ("dataset", &self.dataset),
            ("model", &self.model),
            ("widths", &self.widths),
            ("grid", &self.grid),
            ("order", &self.order),
            ("epochs", &self.epochs),
            ("lr", &self.lr),
            ("batch_size", &self.batch_size),
            ("seed", &self.seed),
            ("subset", &self.subset),
            ("resize", &self.resize),
            ("out_dir", &self.out_dir),
            ("cache_dir", &self.cache_dir),
            ("workers", &self.workers),
            ("registry", &self.registry),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                flags.set(key, v)?;
            }
        }
        if self.full {
            flags.full = Some(true);
            flags.subset = None;
        }
        let mut merged = base.merge(flags);
        // An explicit flag of one kind cancels the other from the file.
        if self.full {
            merged.subset = None;
        } else if self.subset.is_some() {
            merged.full = None;
        }
        Ok(merged)
    }
}

/// Parses `args` (including the program name) and runs the verb.
pub fn run<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::Config(e.render().to_string().trim_end().to_string())),
    };
    let verbose = !cli.quiet;
    match cli.command {
        Command::Fetch { dataset, from, cache_dir } => {
            let dataset: DatasetName = dataset.parse().map_err(|e: kanvision::error::DataError| CliError::Config(e.to_string()))?;
            let cache_dir = cache_dir.unwrap_or_else(crate::config::default_cache_dir);
            let written = fetch::fetch(dataset, &cache_dir, from.as_deref())?;
            println!("{dataset}: {} files in {}", written.len(), cache_dir.join(dataset.as_str()).display());
        }
        Command::Train(run) => {
            let cfg = run.overrides()?.resolve()?;
            train::train(&cfg, verbose)?;
        }
        Command::Eval { checkpoint, run } => {
            let cfg = run.overrides()?.resolve()?;
            train::eval(&cfg, &checkpoint)?;
        }
        Command::Sweep { grids, orders, max_cells, run } => {
            let cfg = run.overrides()?.resolve()?;
            let grid = SweepGrid::parse(grids.as_deref(), orders.as_deref())?;
            let opts = SweepOptions { grid: grid.clone(), max_cells, verbose };
            let rows = run_sweep(&cfg, &opts)?;
            println!("test accuracy");
            print!("{}", format_heatmap(&grid, &rows, |r| format!("{:.4}", r.test_accuracy)));
            println!("parameters");
            print!("{}", format_heatmap(&grid, &rows, |r| r.params.to_string()));
            if let Some(best) = rows.iter().max_by(|a, b| a.test_accuracy.total_cmp(&b.test_accuracy)) {
                let expected = matches!(best.grid, 2 | 3);
                println!(
                    "best cell G={} k={} ({:.4}); {}",
                    best.grid,
                    best.order,
                    best.test_accuracy,
                    if expected { "inside the expected G in {2,3} region" } else { "outside the expected G in {2,3} region" }
                );
            }
            println!("{} of {} cells in {}", rows.len(), grid.cells().len(), cfg.out_dir.join("sweep.csv").display());
        }
        Command::Bench { widths, grid, order, batch, repeats, seed, out } => {
            let widths = parse_usize_list("widths", &widths)?;
            if widths.len() < 2 {
                return Err(CliError::Config("bench needs at least two widths".into()));
            }
            let mut records = Vec::new();
            for pair in widths.windows(2) {
                let cfg = BenchConfig { inputs: pair[0], outputs: pair[1], grid, order, batch, repeats, seed };
                for row in run_bench(&cfg)? {
                    println!(
                        "{:>9} {}->{}: forward {:.3} ms, backward {:.3} ms, {} live floats",
                        row.formulation.name(),
                        pair[0],
                        pair[1],
                        row.forward_ms,
                        row.backward_ms,
                        row.peak_live_floats
                    );
                    records.push(row.to_record());
                }
            }
            write_rows(&out, &BENCH_HEADER, &records)?;
        }
        Command::Reproduce { suite, rows, run } => {
            let suite: Suite = suite.parse()?;
            let only = rows.map(|r| r.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect::<Vec<_>>());
            run_reproduce(suite, run.overrides()?, only.as_deref(), verbose)?;
        }
        Command::Audit(run) => {
            let cfg = run.overrides()?.resolve()?;
            let input = match cfg.resize {
                Some((h, w)) => [cfg.dataset.image_shape()[0], h, w],
                None => cfg.dataset.image_shape(),
            };
            let spec = resolve_spec(&cfg, input)?;
            let model = Model64::build(&spec)?;
            print!("{}", spec.to_stanza());
            println!("{}", model.audit());
        }
    }
    Ok(())
}
