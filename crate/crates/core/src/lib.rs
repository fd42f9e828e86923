//! Kolmogorov-Arnold network (KAN) layers and their MLP/CNN baselines,
//! implemented from scratch with hand-derived gradients.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`] / [`rng`]: dense row-major tensors and a seeded counter-based generator
//! - [`bspline`]: uniform-knot B-spline bases (evaluation and derivatives)
//! - [`layers`]: KAN linear (expanded and matrix forms), MLP linear, conv, KAN conv, pooling
//! - [`loss`] / [`optim`] / [`train`]: softmax cross-entropy, plain SGD, epoch loops
//! - [`data`]: IDX and CIFAR-10 binary parsers, normalisation, subsetting, on-disk cache
//! - [`model`]: declarative model specs, builders, parameter audit, checkpoints
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`, which is what the training
//! pipeline and the test suites use.

pub mod bspline;
pub mod data;
pub mod error;
pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use rng::Rng;
pub use scalar::Scalar;

/// Default floating-point type of the library.
pub type Real = f64;

pub type Tensor64 = tensor::Tensor<f64>;
pub type Tensor32 = tensor::Tensor<f32>;
pub type SplineBasis64 = bspline::SplineBasis<f64>;
pub type UnivariateFunction64 = bspline::UnivariateFunction<f64>;
pub type KanLinear64 = layers::KanLinear<f64>;
pub type MlpLinear64 = layers::MlpLinear<f64>;
pub type Conv2d64 = layers::Conv2d<f64>;
pub type KanConv2d64 = layers::KanConv2d<f64>;
pub type Model64 = model::Model<f64>;
pub type Sgd64 = optim::Sgd<f64>;
