use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::{missing_cache, Layer, Param};

/// Non-overlapping max pooling (`stride == size`, trailing rows/cols dropped).
#[derive(Clone, Debug)]
pub struct MaxPool2d {
    size: usize,
    /// Input shape and the flat input index chosen for every output.
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2d {
    pub fn new(size: usize) -> Self {
        assert!(size >= 1, "pool size must be positive");
        Self { size, cache: None }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn pooled_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match input {
            [c, h, w] if *h >= self.size && *w >= self.size => {
                Ok(vec![*c, h / self.size, w / self.size])
            }
            _ => Err(Error::InvalidShape {
                shape: input.to_vec(),
                reason: format!("max pool {} needs [c, h, w] with h, w >= {}", self.size, self.size),
            }),
        }
    }

    fn compute<T: Scalar>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
        let (b, _) = x.rows_cols();
        let out_shape = self.pooled_shape(&x.shape()[1..])?;
        let (c, h, w) = (x.dim(1), x.dim(2), x.dim(3));
        let (oh, ow) = (out_shape[1], out_shape[2]);
        let mut out = Vec::with_capacity(b * c * oh * ow);
        let mut arg = Vec::with_capacity(b * c * oh * ow);
        let d = x.data();
        for plane in 0..b * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + oy * self.size * w + ox * self.size;
                    for dy in 0..self.size {
                        for dx in 0..self.size {
                            let idx = base + (oy * self.size + dy) * w + ox * self.size + dx;
                            if d[idx] > d[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(d[best]);
                    arg.push(best);
                }
            }
        }
        let mut shape = vec![b];
        shape.extend(out_shape);
        Ok((Tensor::new(shape, out)?, arg))
    }
}

impl<T: Scalar> Layer<T> for MaxPool2d {
    fn kind(&self) -> &'static str {
        "max_pool2d"
    }

    fn describe(&self) -> String {
        format!("max_pool2d {}", self.size)
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (y, arg) = self.compute(x)?;
        self.cache = Some((x.shape().to_vec(), arg));
        Ok(y)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.compute(x)?.0)
    }

    fn backward(&mut self, grad_out: &Tensor<T>, input_grad: bool) -> Result<Option<Tensor<T>>> {
        let (shape, arg) = self.cache.as_ref().ok_or_else(|| missing_cache("max_pool2d"))?;
        if grad_out.len() != arg.len() {
            return Err(Error::ShapeMismatch {
                op: "max_pool2d_backward",
                left: grad_out.shape().to_vec(),
                right: shape.clone(),
            });
        }
        if !input_grad {
            return Ok(None);
        }
        let mut gx = Tensor::zeros(shape.clone())?;
        let gd = gx.data_mut();
        for (&i, &g) in arg.iter().zip(grad_out.data()) {
            gd[i] += g;
        }
        Ok(Some(gx))
    }

    fn params(&self) -> Vec<&Param<T>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        Vec::new()
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.pooled_shape(input)
    }

    fn count_params(&self) -> usize {
        0
    }

    fn clear_cache(&mut self) {
        self.cache = None;
    }
}

/// Reshapes `[b, ...]` to `[b, prod(...)]`.
#[derive(Clone, Debug, Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn new() -> Self {
        Self::default()
    }
}

impl<T: Scalar> Layer<T> for Flatten {
    fn kind(&self) -> &'static str {
        "flatten"
    }

    fn describe(&self) -> String {
        "flatten".into()
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.input_shape = Some(x.shape().to_vec());
        self.infer(x)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, n) = x.rows_cols();
        x.clone().reshape(vec![b, n])
    }

    fn backward(&mut self, grad_out: &Tensor<T>, input_grad: bool) -> Result<Option<Tensor<T>>> {
        let shape = self.input_shape.as_ref().ok_or_else(|| missing_cache("flatten"))?;
        if !input_grad {
            return Ok(None);
        }
        Ok(Some(grad_out.clone().reshape(shape.clone())?))
    }

    fn params(&self) -> Vec<&Param<T>> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        Vec::new()
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(vec![input.iter().product()])
    }

    fn count_params(&self) -> usize {
        0
    }

    fn clear_cache(&mut self) {
        self.input_shape = None;
    }
}
