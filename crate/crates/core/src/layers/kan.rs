//! KAN linear layer.
//!
//! Each edge `(i <- j)` carries a learnable spline `phi_ij` and, optionally,
//! a base term `w_b[i, j] * silu(x_j)`:
//!
//! ```text
//! y[s, i] = sum_j  w_b[i, j] * silu(x[s, j]) + sum_q C[i, j, q] * B_q(x[s, j])
//! ```
//!
//! Two formulations compute the same map. `Expanded` evaluates every edge
//! separately and materialises a `(batch, out, in)` intermediate. `Efficient`
//! evaluates the basis once per input, `Phi(X): [batch, in * (G + k)]`, and
//! gets the spline part as the single product `Phi(X) C^T`.
//!
//! Coefficients are stored as `[out, in, G + k]`, so `C` viewed as a
//! `[out, in * (G + k)]` matrix feeds the product without a copy.

use crate::bspline::{SplineBasis, DEFAULT_RANGE, MAX_DEGREE};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{gemm, Op, Tensor};

use super::{check_input, missing_cache, ActivationKind, Layer, Param};

const BASE: ActivationKind = ActivationKind::SmoothGatedLinear;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Formulation {
    Expanded,
    Efficient,
}

impl Formulation {
    pub fn name(self) -> &'static str {
        match self {
            Formulation::Expanded => "expanded",
            Formulation::Efficient => "efficient",
        }
    }
}

/// Spline hyperparameters shared by KAN layers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KanConfig {
    pub grid_size: usize,
    pub degree: usize,
    pub range: (f64, f64),
    /// Adds the learnable `w_b * silu(x)` residual term.
    pub base: bool,
    pub formulation: Formulation,
}

impl Default for KanConfig {
    fn default() -> Self {
        Self {
            grid_size: 3,
            degree: 3,
            range: DEFAULT_RANGE,
            base: true,
            formulation: Formulation::Efficient,
        }
    }
}

impl KanConfig {
    pub fn new(grid_size: usize, degree: usize) -> Self {
        Self {
            grid_size,
            degree,
            ..Self::default()
        }
    }

    pub fn with_base(mut self, base: bool) -> Self {
        self.base = base;
        self
    }

    pub fn with_formulation(mut self, formulation: Formulation) -> Self {
        self.formulation = formulation;
        self
    }

    pub fn num_basis(&self) -> usize {
        self.grid_size + self.degree
    }

    /// Closed-form parameter count of an `in -> out` layer.
    pub fn param_count(&self, in_features: usize, out_features: usize) -> usize {
        let edges = in_features * out_features;
        edges * self.num_basis() + if self.base { edges } else { 0 }
    }
}

#[derive(Clone, Debug)]
struct KanCache<T> {
    x: Tensor<T>,
    /// `[batch, in * nb]` basis expansion (efficient formulation only).
    phi: Option<Vec<T>>,
}

#[derive(Clone, Debug)]
pub struct KanLinear<T> {
    in_features: usize,
    out_features: usize,
    config: KanConfig,
    basis: SplineBasis<T>,
    spline: Param<T>,
    base_weight: Option<Param<T>>,
    cache: Option<KanCache<T>>,
}

impl<T: Scalar> KanLinear<T> {
    /// Spline coefficients ~ N(0, 0.1 / sqrt(G + k)); base weights
    /// ~ U(-1/sqrt(in), 1/sqrt(in)).
    pub fn new(in_features: usize, out_features: usize, config: KanConfig, rng: &mut Rng) -> Result<Self> {
        let nb = config.num_basis();
        let std = 0.1 / (nb as f64).sqrt();
        let spline = Tensor::from_fn(vec![out_features, in_features, nb], |_| {
            T::lit(rng.normal(0.0, std))
        })?;
        let base = if config.base {
            let bound = 1.0 / (in_features as f64).sqrt();
            Some(Tensor::from_fn(vec![out_features, in_features], |_| {
                T::lit(rng.uniform_range(-bound, bound))
            })?)
        } else {
            None
        };
        Self::from_params(config, spline, base)
    }

    /// Builds a layer from explicit coefficients `[out, in, G + k]` and, when
    /// `config.base` is set, base weights `[out, in]`.
    pub fn from_params(config: KanConfig, spline: Tensor<T>, base_weight: Option<Tensor<T>>) -> Result<Self> {
        let basis = SplineBasis::new(
            config.grid_size,
            config.degree,
            (T::lit(config.range.0), T::lit(config.range.1)),
        )?;
        let nb = basis.num_basis();
        if spline.rank() != 3 || spline.dim(2) != nb {
            return Err(Error::ShapeMismatch {
                op: "kan_linear",
                left: spline.shape().to_vec(),
                right: vec![0, 0, nb],
            });
        }
        let (out_features, in_features) = (spline.dim(0), spline.dim(1));
        match (&base_weight, config.base) {
            (Some(w), true) if w.shape() == [out_features, in_features] => {}
            (None, false) => {}
            (w, _) => {
                return Err(Error::InvalidSpec(format!(
                    "base weight {:?} inconsistent with base={} for {in_features}->{out_features}",
                    w.as_ref().map(|w| w.shape().to_vec()),
                    config.base
                )))
            }
        }
        debug_assert!(config.degree <= MAX_DEGREE);
        Ok(Self {
            in_features,
            out_features,
            config,
            basis,
            spline: Param::new("spline_coeffs", spline),
            base_weight: base_weight.map(|w| Param::new("base_weight", w)),
            cache: None,
        })
    }

    pub fn config(&self) -> &KanConfig {
        &self.config
    }

    pub fn basis(&self) -> &SplineBasis<T> {
        &self.basis
    }

    pub fn in_features(&self) -> usize {
        self.in_features
    }

    pub fn out_features(&self) -> usize {
        self.out_features
    }

    pub fn spline_coeffs(&self) -> &Param<T> {
        &self.spline
    }

    pub fn base_weight(&self) -> Option<&Param<T>> {
        self.base_weight.as_ref()
    }

    pub fn formulation(&self) -> Formulation {
        self.config.formulation
    }

    pub fn set_formulation(&mut self, formulation: Formulation) {
        self.config.formulation = formulation;
        self.cache = None;
    }

    /// Floats held by the largest forward intermediate for a batch.
    pub fn intermediate_floats(&self, batch: usize) -> usize {
        match self.config.formulation {
            Formulation::Expanded => batch * self.out_features * self.in_features,
            Formulation::Efficient => batch * self.in_features * self.basis.num_basis(),
        }
    }

    /// Basis-function evaluations performed by one forward pass.
    pub fn basis_evaluations(&self, batch: usize) -> usize {
        let per_input = batch * self.in_features * self.basis.num_basis();
        match self.config.formulation {
            Formulation::Expanded => per_input * self.out_features,
            Formulation::Efficient => per_input,
        }
    }

    /// `Phi(X)` as a dense `[batch, in * nb]` buffer.
    fn expand_basis(&self, x: &[T]) -> Vec<T> {
        let nb = self.basis.num_basis();
        let k = self.basis.degree();
        let mut phi = vec![T::zero(); x.len() * nb];
        let mut local = [T::zero(); MAX_DEGREE + 1];
        for (&v, row) in x.iter().zip(phi.chunks_mut(nb)) {
            let first = self.basis.eval_local(v, &mut local, None);
            row[first..=first + k].copy_from_slice(&local[..=k]);
        }
        phi
    }

    fn add_base(&self, x: &[T], batch: usize, y: &mut [T]) {
        if let Some(w) = &self.base_weight {
            let act: Vec<T> = x.iter().map(|&v| BASE.apply(v)).collect();
            let (i, o) = (self.in_features, self.out_features);
            gemm(T::one(), &act, (batch, i), Op::N, w.value.data(), (o, i), Op::T, T::one(), y);
        }
    }

    fn forward_efficient(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Vec<T>)> {
        let b = check_input(x, &[self.in_features], "kan_linear_forward")?;
        if !x.data().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: "kan_linear_forward" });
        }
        let (i, o, nb) = (self.in_features, self.out_features, self.basis.num_basis());
        let phi = self.expand_basis(x.data());
        let mut y = vec![T::zero(); b * o];
        gemm(T::one(), &phi, (b, i * nb), Op::N, self.spline.value.data(), (o, i * nb), Op::T, T::zero(), &mut y);
        self.add_base(x.data(), b, &mut y);
        let y = Tensor::new(vec![b, o], y)?;
        y.ensure_finite("kan_linear_forward")?;
        Ok((y, phi))
    }

    fn forward_expanded(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let b = check_input(x, &[self.in_features], "kan_linear_forward")?;
        if !x.data().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: "kan_linear_forward" });
        }
        let (i_n, o_n, nb, k) = (
            self.in_features,
            self.out_features,
            self.basis.num_basis(),
            self.basis.degree(),
        );
        let c = self.spline.value.data();
        let wb = self.base_weight.as_ref().map(|p| p.value.data());
        let mut local = [T::zero(); MAX_DEGREE + 1];
        // (batch, out, in): every edge applies its own function to its input.
        let mut expanded = vec![T::zero(); b * o_n * i_n];
        for s in 0..b {
            let xs = &x.data()[s * i_n..(s + 1) * i_n];
            for o in 0..o_n {
                let cell = &mut expanded[(s * o_n + o) * i_n..(s * o_n + o + 1) * i_n];
                for (j, &v) in xs.iter().enumerate() {
                    let first = self.basis.eval_local(v, &mut local, None);
                    let coeffs = &c[(o * i_n + j) * nb + first..(o * i_n + j) * nb + first + k + 1];
                    let mut e: T = coeffs.iter().zip(&local[..=k]).map(|(&c, &b)| c * b).sum();
                    if let Some(wb) = wb {
                        e += wb[o * i_n + j] * BASE.apply(v);
                    }
                    cell[j] = e;
                }
            }
        }
        let y: Vec<T> = expanded.chunks(i_n).map(|edges| edges.iter().copied().sum()).collect();
        let y = Tensor::new(vec![b, o_n], y)?;
        y.ensure_finite("kan_linear_forward")?;
        Ok(y)
    }

    fn check_grad(&self, grad_out: &Tensor<T>, batch: usize) -> Result<()> {
        if grad_out.shape() != [batch, self.out_features] {
            return Err(Error::ShapeMismatch {
                op: "kan_linear_backward",
                left: grad_out.shape().to_vec(),
                right: vec![batch, self.out_features],
            });
        }
        Ok(())
    }

    fn backward_efficient(
        &mut self,
        x: &Tensor<T>,
        phi: &[T],
        grad_out: &Tensor<T>,
        input_grad: bool,
    ) -> Result<Option<Tensor<T>>> {
        let b = x.dim(0);
        let (i_n, o_n, nb, k) = (
            self.in_features,
            self.out_features,
            self.basis.num_basis(),
            self.basis.degree(),
        );
        let g = grad_out.data();
        gemm(T::one(), g, (b, o_n), Op::T, phi, (b, i_n * nb), Op::N, T::one(), self.spline.grad.data_mut());
        if let Some(w) = &mut self.base_weight {
            let act: Vec<T> = x.data().iter().map(|&v| BASE.apply(v)).collect();
            gemm(T::one(), g, (b, o_n), Op::T, &act, (b, i_n), Op::N, T::one(), w.grad.data_mut());
        }
        if !input_grad {
            return Ok(None);
        }
        let mut gphi = vec![T::zero(); b * i_n * nb];
        gemm(T::one(), g, (b, o_n), Op::N, self.spline.value.data(), (o_n, i_n * nb), Op::N, T::zero(), &mut gphi);
        let mut gx = vec![T::zero(); b * i_n];
        if k >= 1 {
            let mut vals = [T::zero(); MAX_DEGREE + 1];
            let mut ders = [T::zero(); MAX_DEGREE + 1];
            for (idx, (&v, gp)) in x.data().iter().zip(gphi.chunks(nb)).enumerate() {
                let first = self.basis.eval_local(v, &mut vals, Some(&mut ders));
                gx[idx] = gp[first..=first + k].iter().zip(&ders[..=k]).map(|(&a, &d)| a * d).sum();
            }
        }
        if let Some(w) = &self.base_weight {
            let mut gact = vec![T::zero(); b * i_n];
            gemm(T::one(), g, (b, o_n), Op::N, w.value.data(), (o_n, i_n), Op::N, T::zero(), &mut gact);
            for ((acc, &ga), &v) in gx.iter_mut().zip(&gact).zip(x.data()) {
                *acc += ga * BASE.derivative(v);
            }
        }
        Ok(Some(Tensor::new(vec![b, i_n], gx)?))
    }

    fn backward_expanded(&mut self, x: &Tensor<T>, grad_out: &Tensor<T>, input_grad: bool) -> Result<Option<Tensor<T>>> {
        let b = x.dim(0);
        let (i_n, o_n, nb, k) = (
            self.in_features,
            self.out_features,
            self.basis.num_basis(),
            self.basis.degree(),
        );
        let g = grad_out.data();
        let c = self.spline.value.data();
        let gc = self.spline.grad.data_mut();
        let mut gwb = self.base_weight.as_mut().map(|p| p.grad.data_mut().to_vec());
        let wb = self.base_weight.as_ref().map(|p| p.value.data());
        let mut gx = vec![T::zero(); b * i_n];
        let mut vals = [T::zero(); MAX_DEGREE + 1];
        let mut ders = [T::zero(); MAX_DEGREE + 1];
        for s in 0..b {
            for o in 0..o_n {
                let go = g[s * o_n + o];
                for j in 0..i_n {
                    let v = x.data()[s * i_n + j];
                    let first = if k >= 1 {
                        self.basis.eval_local(v, &mut vals, Some(&mut ders))
                    } else {
                        self.basis.eval_local(v, &mut vals, None)
                    };
                    let edge = (o * i_n + j) * nb + first;
                    let mut dphi = T::zero();
                    for q in 0..=k {
                        gc[edge + q] += go * vals[q];
                        if k >= 1 {
                            dphi += c[edge + q] * ders[q];
                        }
                    }
                    if let (Some(gwb), Some(wb)) = (gwb.as_mut(), wb) {
                        gwb[o * i_n + j] += go * BASE.apply(v);
                        dphi += wb[o * i_n + j] * BASE.derivative(v);
                    }
                    gx[s * i_n + j] += go * dphi;
                }
            }
        }
        if let (Some(p), Some(acc)) = (self.base_weight.as_mut(), gwb) {
            p.grad.data_mut().copy_from_slice(&acc);
        }
        Ok(if input_grad {
            Some(Tensor::new(vec![b, i_n], gx)?)
        } else {
            None
        })
    }
}

impl<T: Scalar> Layer<T> for KanLinear<T> {
    fn kind(&self) -> &'static str {
        "kan_linear"
    }

    fn describe(&self) -> String {
        format!(
            "kan_linear {}->{} G={} k={} {}{}",
            self.in_features,
            self.out_features,
            self.config.grid_size,
            self.config.degree,
            self.config.formulation.name(),
            if self.config.base { " +base" } else { "" }
        )
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self.config.formulation {
            Formulation::Efficient => {
                let (y, phi) = self.forward_efficient(x)?;
                self.cache = Some(KanCache {
                    x: x.clone(),
                    phi: Some(phi),
                });
                Ok(y)
            }
            Formulation::Expanded => {
                let y = self.forward_expanded(x)?;
                self.cache = Some(KanCache { x: x.clone(), phi: None });
                Ok(y)
            }
        }
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self.config.formulation {
            Formulation::Efficient => Ok(self.forward_efficient(x)?.0),
            Formulation::Expanded => self.forward_expanded(x),
        }
    }

    fn backward(&mut self, grad_out: &Tensor<T>, input_grad: bool) -> Result<Option<Tensor<T>>> {
        let cache = self.cache.take().ok_or_else(|| missing_cache("kan_linear"))?;
        let result = self.check_grad(grad_out, cache.x.dim(0)).and_then(|_| match &cache.phi {
            Some(phi) => self.backward_efficient(&cache.x, phi, grad_out, input_grad),
            None => self.backward_expanded(&cache.x, grad_out, input_grad),
        });
        self.cache = Some(cache);
        result
    }

    fn params(&self) -> Vec<&Param<T>> {
        let mut p = vec![&self.spline];
        p.extend(self.base_weight.as_ref());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut p = vec![&mut self.spline];
        p.extend(self.base_weight.as_mut());
        p
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input != [self.in_features] {
            return Err(Error::ShapeMismatch {
                op: "kan_linear",
                left: input.to_vec(),
                right: vec![self.in_features],
            });
        }
        Ok(vec![self.out_features])
    }

    fn count_params(&self) -> usize {
        self.config.param_count(self.in_features, self.out_features)
    }

    fn clear_cache(&mut self) {
        self.cache = None;
    }
}
