use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{Layer, Param};

/// Fixed elementwise nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Tanh,
    /// `x * sigmoid(x)`, also the KAN base function.
    SmoothGatedLinear,
}

impl ActivationKind {
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            ActivationKind::Relu => x.max(T::zero()),
            ActivationKind::Sigmoid => sigmoid(x),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::SmoothGatedLinear => x * sigmoid(x),
        }
    }

    /// Derivative at the pre-activation value `x`.
    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            ActivationKind::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            ActivationKind::Sigmoid => {
                let s = sigmoid(x);
                s * (T::one() - s)
            }
            ActivationKind::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            ActivationKind::SmoothGatedLinear => {
                let s = sigmoid(x);
                s * (T::one() + x * (T::one() - s))
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
            ActivationKind::SmoothGatedLinear => "silu",
        }
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "relu" => Ok(ActivationKind::Relu),
            "sigmoid" => Ok(ActivationKind::Sigmoid),
            "tanh" => Ok(ActivationKind::Tanh),
            "silu" | "swish" | "smooth_gated_linear" => Ok(ActivationKind::SmoothGatedLinear),
            other => Err(Error::InvalidSpec(format!("unknown activation {other:?}"))),
        }
    }
}

/// Standalone activation over tensors of any shape.
#[derive(Clone, Debug)]
pub struct Activation<T> {
    kind: ActivationKind,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Activation<T> {
    pub fn new(kind: ActivationKind) -> Self {
        Self { kind, input: None }
    }

    pub fn activation(&self) -> ActivationKind {
        self.kind
    }
}

impl<T: Scalar> Layer<T> for Activation<T> {
    fn kind(&self) -> &'static str {
        "activation"
    }

    fn describe(&self) -> String {
        format!("activation {}", self.kind)
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.infer(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let k = self.kind;
        x.map(|v| k.apply(v))
    }

    fn backward(&mut self, grad_out: &Tensor<T>, input_grad: bool) -> Result<Option<Tensor<T>>> {
        let x = self.input.as_ref().ok_or_else(|| super::missing_cache("activation"))?;
        if grad_out.shape() != x.shape() {
            return Err(Error::ShapeMismatch {
                op: "activation_backward",
                left: grad_out.shape().to_vec(),
                right: x.shape().to_vec(),
            });
        }
        if !input_grad {
            return Ok(None);
        }
        let k = self.kind;
        let data = x
            .data()
            .iter()
            .zip(grad_out.data())
            .map(|(&v, &g)| g * k.derivative(v))
            .collect();
        Ok(Some(Tensor::new(x.shape().to_vec(), data)?))
    }

    fn params(&self) -> Vec<&Param<T>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        Vec::new()
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn count_params(&self) -> usize {
        0
    }

    fn clear_cache(&mut self) {
        self.input = None;
    }
}
