//! Trainable layers with hand-derived gradients.
//!
//! Every layer takes a batch-first tensor. `forward` caches what `backward`
//! needs; `infer` is a pure pass without side effects. Parameter gradients
//! accumulate into [`Param::grad`] until the optimizer zeroes them.

mod activation;
mod conv;
mod kan;
mod kan_conv;
mod linear;
mod pool;

pub use activation::{Activation, ActivationKind};
pub use conv::{col2im, im2col, Conv2d, ConvGeometry};
pub use kan::{KanConfig, KanLinear, Formulation};
pub use kan_conv::KanConv2d;
pub use linear::MlpLinear;
pub use pool::{Flatten, MaxPool2d};

use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// A named trainable tensor and its gradient accumulator.
#[derive(Clone, Debug)]
pub struct Param<T> {
    pub name: &'static str,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: &'static str, value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape().to_vec()).expect("value shape is valid");
        Self { name, value, grad }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

pub trait Layer<T: Scalar>: Send + Sync {
    /// Short kind name used in audits and checkpoints.
    fn kind(&self) -> &'static str;

    /// Human-readable shape summary, e.g. `kan_linear 784->64 G=3 k=3`.
    fn describe(&self) -> String;

    /// Training pass: caches inputs for [`Layer::backward`].
    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>>;

    /// Inference pass with no caching.
    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>>;

    /// Accumulates parameter gradients and, when requested, returns the
    /// gradient with respect to the cached input.
    fn backward(&mut self, grad_out: &Tensor<T>, input_grad: bool) -> Result<Option<Tensor<T>>>;

    fn params(&self) -> Vec<&Param<T>>;

    fn params_mut(&mut self) -> Vec<&mut Param<T>>;

    /// Per-sample output shape for a per-sample input shape.
    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    /// Trainable scalar count from the layer's closed-form formula.
    fn count_params(&self) -> usize;

    /// Drops cached activations.
    fn clear_cache(&mut self) {}
}

/// Returns the batch size of `x` after checking the per-sample shape.
pub(crate) fn check_input<T: Scalar>(
    x: &Tensor<T>,
    expected: &[usize],
    op: &'static str,
) -> Result<usize> {
    if x.rank() != expected.len() + 1 || x.shape()[1..] != *expected {
        let mut want = vec![x.shape().first().copied().unwrap_or(0)];
        want.extend_from_slice(expected);
        return Err(crate::Error::ShapeMismatch {
            op,
            left: x.shape().to_vec(),
            right: want,
        });
    }
    Ok(x.shape()[0])
}

pub(crate) fn missing_cache(layer: &str) -> crate::Error {
    crate::Error::BackwardBeforeForward {
        layer: layer.to_string(),
    }
}
