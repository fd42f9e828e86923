//! `train` and `eval`.

use std::path::Path;

use kanvision::data::Split;
use kanvision::model::load_checkpoint;
use kanvision::train::{evaluate, Evaluation};
use kanvision::Model64;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::run::{load_split, load_splits, record_run, resolve_spec, train_model, RunOutcome};

/// Trains the configured model and records the run under `cfg.out_dir`.
pub fn train(cfg: &ExperimentConfig, verbose: bool) -> CliResult<RunOutcome> {
    let splits = load_splits(cfg)?;
    let spec = resolve_spec(cfg, splits.train.image_shape())?;
    let outcome = train_model(cfg, &spec, &splits, verbose)?;
    let dir = record_run(cfg, &outcome)?;
    println!(
        "{}: test accuracy {:.4}, {} params, {:.1}s -> {}",
        outcome.name,
        outcome.evaluation.accuracy,
        outcome.params(),
        outcome.wall_seconds,
        dir.display()
    );
    Ok(outcome)
}

/// Evaluates a checkpoint on the test split of the configured dataset.
pub fn eval(cfg: &ExperimentConfig, checkpoint: &Path) -> CliResult<Evaluation> {
    let model: Model64 = load_checkpoint(checkpoint)?;
    let test = load_split(cfg, Split::Test)?;
    if model.spec().input != test.image_shape() {
        let [c, h, w] = model.spec().input;
        return Err(CliError::Config(format!(
            "{} expects {c}x{h}x{w} images; {} test images are {:?}",
            checkpoint.display(),
            cfg.dataset,
            test.image_shape()
        )));
    }
    let ev = evaluate(&model, &test, 500)?;
    println!(
        "{}: test accuracy {:.4} ({}/{}), loss {:.4}",
        checkpoint.display(),
        ev.accuracy,
        ev.correct,
        ev.total,
        ev.mean_loss
    );
    Ok(ev)
}
