use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{gemm, Op, Tensor};

use super::{check_input, missing_cache, ActivationKind, Layer, Param};

/// Affine map followed by an optional fixed activation:
/// `y = act(x W^T + b)` with `W: [out, in]`, `b: [out]`.
#[derive(Clone, Debug)]
pub struct MlpLinear<T> {
    in_features: usize,
    out_features: usize,
    activation: Option<ActivationKind>,
    weight: Param<T>,
    bias: Param<T>,
    cache: Option<(Tensor<T>, Tensor<T>)>,
}

impl<T: Scalar> MlpLinear<T> {
    /// Kaiming-uniform weights (`bound = sqrt(6 / in)`), zero biases.
    pub fn new(
        in_features: usize,
        out_features: usize,
        activation: Option<ActivationKind>,
        rng: &mut Rng,
    ) -> Result<Self> {
        let bound = (6.0 / in_features as f64).sqrt();
        let w = Tensor::from_fn(vec![out_features, in_features], |_| {
            T::lit(rng.uniform_range(-bound, bound))
        })?;
        let b = Tensor::zeros(vec![out_features])?;
        Self::from_params(w, b, activation)
    }

    pub fn from_params(
        weight: Tensor<T>,
        bias: Tensor<T>,
        activation: Option<ActivationKind>,
    ) -> Result<Self> {
        if weight.rank() != 2 || bias.shape() != [weight.dim(0)] {
            return Err(Error::ShapeMismatch {
                op: "mlp_linear",
                left: weight.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        Ok(Self {
            in_features: weight.dim(1),
            out_features: weight.dim(0),
            activation,
            weight: Param::new("weight", weight),
            bias: Param::new("bias", bias),
            cache: None,
        })
    }

    pub fn in_features(&self) -> usize {
        self.in_features
    }

    pub fn out_features(&self) -> usize {
        self.out_features
    }

    pub fn activation(&self) -> Option<ActivationKind> {
        self.activation
    }

    pub fn weight(&self) -> &Param<T> {
        &self.weight
    }

    pub fn bias(&self) -> &Param<T> {
        &self.bias
    }

    fn pre_activation(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let b = check_input(x, &[self.in_features], "mlp_linear_forward")?;
        let (i, o) = (self.in_features, self.out_features);
        let mut z = Vec::with_capacity(b * o);
        for _ in 0..b {
            z.extend_from_slice(self.bias.value.data());
        }
        gemm(T::one(), x.data(), (b, i), Op::N, self.weight.value.data(), (o, i), Op::T, T::one(), &mut z);
        Tensor::new(vec![b, o], z)
    }

    fn activate(&self, z: &Tensor<T>) -> Result<Tensor<T>> {
        let y = match self.activation {
            Some(k) => z.map(|v| k.apply(v))?,
            None => z.clone(),
        };
        y.ensure_finite("mlp_linear_forward")?;
        Ok(y)
    }
}

impl<T: Scalar> Layer<T> for MlpLinear<T> {
    fn kind(&self) -> &'static str {
        "mlp_linear"
    }

    fn describe(&self) -> String {
        match self.activation {
            Some(a) => format!("mlp_linear {}->{} {a}", self.in_features, self.out_features),
            None => format!("mlp_linear {}->{}", self.in_features, self.out_features),
        }
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let z = self.pre_activation(x)?;
        let y = self.activate(&z)?;
        self.cache = Some((x.clone(), z));
        Ok(y)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.activate(&self.pre_activation(x)?)
    }

    fn backward(&mut self, grad_out: &Tensor<T>, input_grad: bool) -> Result<Option<Tensor<T>>> {
        let (x, z) = self.cache.as_ref().ok_or_else(|| missing_cache("mlp_linear"))?;
        if grad_out.shape() != z.shape() {
            return Err(Error::ShapeMismatch {
                op: "mlp_linear_backward",
                left: grad_out.shape().to_vec(),
                right: z.shape().to_vec(),
            });
        }
        let (b, i, o) = (x.dim(0), self.in_features, self.out_features);
        let gz: Vec<T> = match self.activation {
            Some(k) => grad_out
                .data()
                .iter()
                .zip(z.data())
                .map(|(&g, &zv)| g * k.derivative(zv))
                .collect(),
            None => grad_out.data().to_vec(),
        };
        gemm(T::one(), &gz, (b, o), Op::T, x.data(), (b, i), Op::N, T::one(), self.weight.grad.data_mut());
        let gb = self.bias.grad.data_mut();
        for row in gz.chunks(o) {
            for (acc, &g) in gb.iter_mut().zip(row) {
                *acc += g;
            }
        }
        if !input_grad {
            return Ok(None);
        }
        let mut gx = vec![T::zero(); b * i];
        gemm(T::one(), &gz, (b, o), Op::N, self.weight.value.data(), (o, i), Op::N, T::zero(), &mut gx);
        Ok(Some(Tensor::new(vec![b, i], gx)?))
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input != [self.in_features] {
            return Err(Error::ShapeMismatch {
                op: "mlp_linear",
                left: input.to_vec(),
                right: vec![self.in_features],
            });
        }
        Ok(vec![self.out_features])
    }

    fn count_params(&self) -> usize {
        self.in_features * self.out_features + self.out_features
    }

    fn clear_cache(&mut self) {
        self.cache = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_relu() {
        let w = Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let b = Tensor::zeros(vec![2]).unwrap();
        let l = MlpLinear::from_params(w, b, Some(ActivationKind::Relu)).unwrap();
        let y = l.infer(&Tensor::new(vec![1, 2], vec![-1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[0.0, 2.0]);
    }

    #[test]
    fn zero_weights_sigmoid_half() {
        let l = MlpLinear::<f64>::from_params(
            Tensor::zeros(vec![3, 4]).unwrap(),
            Tensor::zeros(vec![3]).unwrap(),
            Some(ActivationKind::Sigmoid),
        )
        .unwrap();
        let y = l.infer(&Tensor::full(vec![2, 4], 0.3).unwrap()).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn counts() {
        let mut rng = Rng::new(0);
        let l = MlpLinear::<f64>::new(784, 64, Some(ActivationKind::Relu), &mut rng).unwrap();
        assert_eq!(l.count_params(), 50_240);
        assert_eq!(l.params().iter().map(|p| p.len()).sum::<usize>(), 50_240);
    }

    #[test]
    fn backward_before_forward() {
        let mut rng = Rng::new(0);
        let mut l = MlpLinear::<f64>::new(3, 2, None, &mut rng).unwrap();
        let g = Tensor::zeros(vec![1, 2]).unwrap();
        assert!(matches!(l.backward(&g, true), Err(Error::BackwardBeforeForward { .. })));
    }

    #[test]
    fn shape_mismatch() {
        let mut rng = Rng::new(0);
        let l = MlpLinear::<f64>::new(3, 2, None, &mut rng).unwrap();
        assert!(l.infer(&Tensor::zeros(vec![1, 4]).unwrap()).is_err());
    }
}
