//! Model assembly from declarative specs, parameter audits and checkpoints.

mod checkpoint;
mod spec;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use spec::{
    builtin, builtin_specs, format_widths, parse_registry, parse_widths, ConvStage, ModelKind, ModelSpec,
    BUILTIN_REGISTRY, DEFAULT_GRID, DEFAULT_ORDER, DEFAULT_SEED,
};

use std::fmt;

use crate::error::{Error, Result};
use crate::layers::{
    Activation, Conv2d, ConvGeometry, Flatten, Formulation, KanConfig, KanConv2d, KanLinear, Layer, MaxPool2d,
    MlpLinear, Param,
};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// An ordered stack of layers built from a [`ModelSpec`].
pub struct Model<T: Scalar> {
    spec: ModelSpec,
    input_shape: Vec<usize>,
    layers: Vec<Box<dyn Layer<T>>>,
}

impl<T: Scalar> fmt::Debug for Model<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("spec", &self.spec.name)
            .field("layers", &self.layers.iter().map(|l| l.describe()).collect::<Vec<_>>())
            .finish()
    }
}

impl<T: Scalar> Model<T> {
    /// Deterministic construction: layer initialisation draws from one
    /// generator seeded with `spec.seed`, in layer order.
    pub fn build(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let mut rng = Rng::new(spec.seed);
        let mut layers: Vec<Box<dyn Layer<T>>> = Vec::new();
        let kan = KanConfig::new(spec.grid, spec.order).with_base(spec.base);

        let input_shape = if spec.kind.has_conv() {
            let mut shape = spec.input;
            for stage in &spec.conv {
                let geometry = ConvGeometry::new(shape, (stage.kernel, stage.kernel), 1, 0)?;
                if spec.kind.spline_conv() {
                    layers.push(Box::new(KanConv2d::new(geometry, stage.channels, kan, &mut rng)?));
                } else {
                    layers.push(Box::new(Conv2d::new(geometry, stage.channels, &mut rng)?));
                    layers.push(Box::new(Activation::new(spec.activation)));
                }
                layers.push(Box::new(MaxPool2d::new(spec.pool)));
                let (h, w) = geometry.output_hw()?;
                shape = [stage.channels, h / spec.pool, w / spec.pool];
            }
            layers.push(Box::new(Flatten::new()));
            spec.input.to_vec()
        } else {
            vec![spec.widths[0]]
        };

        let n = spec.widths.len() - 1;
        for (i, pair) in spec.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            if spec.kind.kan_head() {
                let formulation = if spec.kind == ModelKind::Kan {
                    Formulation::Expanded
                } else {
                    Formulation::Efficient
                };
                layers.push(Box::new(KanLinear::new(
                    fan_in,
                    fan_out,
                    kan.with_formulation(formulation),
                    &mut rng,
                )?));
            } else {
                let act = (i + 1 < n).then_some(spec.activation);
                layers.push(Box::new(MlpLinear::new(fan_in, fan_out, act, &mut rng)?));
            }
        }

        let model = Self {
            spec: spec.clone(),
            input_shape,
            layers,
        };
        let out = model.output_shape()?;
        if out != [spec.classes()] {
            return Err(Error::InvalidSpec(format!(
                "{}: layers compose to output {out:?}, expected [{}]",
                spec.name,
                spec.classes()
            )));
        }
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Per-sample input shape the first layer expects.
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn layers(&self) -> &[Box<dyn Layer<T>>] {
        &self.layers
    }

    pub fn output_shape(&self) -> Result<Vec<usize>> {
        self.layers
            .iter()
            .try_fold(self.input_shape.clone(), |shape, layer| layer.output_shape(&shape))
    }

    /// Accepts `[b, c, h, w]` or `[b, c*h*w]` and reshapes to the model's
    /// input layout.
    fn prepare(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let per: usize = self.input_shape.iter().product();
        if x.rank() >= 2 && x.shape()[1..].iter().product::<usize>() == per {
            let mut shape = vec![x.dim(0)];
            shape.extend_from_slice(&self.input_shape);
            return x.clone().reshape(shape);
        }
        let mut want = vec![x.shape().first().copied().unwrap_or(0)];
        want.extend_from_slice(&self.input_shape);
        Err(Error::ShapeMismatch {
            op: "model_input",
            left: x.shape().to_vec(),
            right: want,
        })
    }

    /// Training pass; caches activations for [`Model::backward`].
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = self.prepare(x)?;
        for layer in &mut self.layers {
            h = layer.forward(&h)?;
        }
        Ok(h)
    }

    /// Back-propagates the loss gradient with respect to the logits. The
    /// first layer skips computing a gradient for the input images.
    pub fn backward(&mut self, grad_logits: &Tensor<T>) -> Result<()> {
        let mut g = grad_logits.clone();
        for (i, layer) in self.layers.iter_mut().enumerate().rev() {
            match layer.backward(&g, i > 0)? {
                Some(next) => g = next,
                None => break,
            }
        }
        Ok(())
    }

    /// Pure inference: no caches are touched.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut h = self.prepare(x)?;
        for layer in &self.layers {
            h = layer.infer(&h)?;
        }
        Ok(h)
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn clear_cache(&mut self) {
        for l in &mut self.layers {
            l.clear_cache();
        }
    }

    /// Count of trainable scalars actually allocated.
    pub fn allocated_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn audit(&self) -> ParamAudit {
        let rows: Vec<AuditRow> = self
            .layers
            .iter()
            .enumerate()
            .map(|(index, l)| AuditRow {
                index,
                layer: l.describe(),
                count: l.count_params(),
            })
            .collect();
        ParamAudit {
            total: rows.iter().map(|r| r.count).sum(),
            rows,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditRow {
    pub index: usize,
    pub layer: String,
    pub count: usize,
}

/// Per-layer trainable parameter counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamAudit {
    pub rows: Vec<AuditRow>,
    pub total: usize,
}

impl fmt::Display for ParamAudit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.layer.len()).max().unwrap_or(5).max(5);
        for r in &self.rows {
            writeln!(f, "{:>3}  {:<width$}  {:>10}", r.index, r.layer, r.count)?;
        }
        write!(f, "     {:<width$}  {:>10}", "total", self.total)
    }
}
