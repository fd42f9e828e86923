//! `bench`: forward and backward timings of the expanded and matrix
//! formulations of one KAN layer on identical parameters.

use std::time::Instant;

use kanvision::layers::{Formulation, KanConfig, KanLinear, Layer};
use kanvision::{Rng, Tensor64};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub inputs: usize,
    pub outputs: usize,
    pub grid: usize,
    pub order: usize,
    pub batch: usize,
    pub repeats: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub formulation: Formulation,
    pub config_inputs: usize,
    pub config_outputs: usize,
    pub grid: usize,
    pub order: usize,
    pub batch: usize,
    pub repeats: usize,
    pub forward_ms: f64,
    pub backward_ms: f64,
    pub peak_live_floats: usize,
    pub basis_evaluations: usize,
}

impl BenchRow {
    pub fn to_record(&self) -> Vec<String> {
        vec![
            self.formulation.name().to_string(),
            self.config_inputs.to_string(),
            self.config_outputs.to_string(),
            self.grid.to_string(),
            self.order.to_string(),
            self.batch.to_string(),
            self.repeats.to_string(),
            format!("{:.3}", self.forward_ms),
            format!("{:.3}", self.backward_ms),
            self.peak_live_floats.to_string(),
            self.basis_evaluations.to_string(),
        ]
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn run_bench(cfg: &BenchConfig) -> CliResult<Vec<BenchRow>> {
    if cfg.repeats == 0 || cfg.batch == 0 || cfg.inputs == 0 || cfg.outputs == 0 {
        return Err(CliError::Config("bench sizes and repeats must be positive".into()));
    }
    let mut rng = Rng::new(cfg.seed);
    let config = KanConfig::new(cfg.grid, cfg.order);
    let reference = KanLinear::<f64>::new(cfg.inputs, cfg.outputs, config, &mut rng)?;
    let x = Tensor64::from_fn(vec![cfg.batch, cfg.inputs], |_| rng.uniform_range(-1.0, 1.0))?;
    let g = Tensor64::from_fn(vec![cfg.batch, cfg.outputs], |_| rng.uniform_range(-1.0, 1.0))?;

    let mut rows = Vec::new();
    for formulation in [Formulation::Expanded, Formulation::Efficient] {
        let mut layer = reference.clone();
        layer.set_formulation(formulation);
        let mut fwd = Vec::with_capacity(cfg.repeats);
        let mut bwd = Vec::with_capacity(cfg.repeats);
        for _ in 0..cfg.repeats {
            let t = Instant::now();
            std::hint::black_box(layer.forward(&x)?);
            fwd.push(t.elapsed().as_secs_f64() * 1e3);
            let t = Instant::now();
            std::hint::black_box(layer.backward(&g, true)?);
            bwd.push(t.elapsed().as_secs_f64() * 1e3);
        }
        rows.push(BenchRow {
            formulation,
            config_inputs: cfg.inputs,
            config_outputs: cfg.outputs,
            grid: cfg.grid,
            order: cfg.order,
            batch: cfg.batch,
            repeats: cfg.repeats,
            forward_ms: median(fwd),
            backward_ms: median(bwd),
            peak_live_floats: layer.intermediate_floats(cfg.batch),
            basis_evaluations: layer.basis_evaluations(cfg.batch),
        });
    }
    Ok(rows)
}
