//! Standard 2-D convolution (cross-correlation) via patch extraction.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{gemm, Op, Tensor};

use super::{check_input, missing_cache, Layer, Param};

/// Input/kernel geometry of a convolution over `[c, h, w]` samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(
        input: [usize; 3],
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let g = Self {
            channels: input[0],
            height: input[1],
            width: input[2],
            kernel_h: kernel.0,
            kernel_w: kernel.1,
            stride,
            padding,
        };
        g.output_hw()?;
        Ok(g)
    }

    /// `(h + 2p - kh) / stride + 1`, required to be integral.
    pub fn output_hw(&self) -> Result<(usize, usize)> {
        let dim = |size: usize, k: usize| -> Result<usize> {
            let padded = size + 2 * self.padding;
            if self.stride == 0 || k == 0 || padded < k || !(padded - k).is_multiple_of(self.stride) {
                return Err(Error::InvalidShape {
                    shape: vec![self.channels, self.height, self.width],
                    reason: format!(
                        "kernel {k} with stride {} and padding {} gives a non-integral output size",
                        self.stride, self.padding
                    ),
                });
            }
            Ok((padded - k) / self.stride + 1)
        };
        Ok((dim(self.height, self.kernel_h)?, dim(self.width, self.kernel_w)?))
    }

    /// Elements per patch, `c * kh * kw`.
    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel_h * self.kernel_w
    }

    pub fn input_len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

/// Extracts patches into a `[batch * oh * ow, c * kh * kw]` matrix.
///
/// Rows run over `(sample, oy, ox)`, columns over `(channel, ky, kx)`;
/// positions in the zero padding contribute zeros.
pub fn im2col<T: Scalar>(x: &[T], batch: usize, g: &ConvGeometry) -> Result<Vec<T>> {
    let (oh, ow) = g.output_hw()?;
    assert_eq!(x.len(), batch * g.input_len(), "im2col input length");
    let k = g.patch_len();
    let mut cols = vec![T::zero(); batch * oh * ow * k];
    let pad = g.padding as isize;
    for s in 0..batch {
        let img = &x[s * g.input_len()..(s + 1) * g.input_len()];
        for oy in 0..oh {
            for ox in 0..ow {
                let row = &mut cols[((s * oh + oy) * ow + ox) * k..][..k];
                let mut idx = 0;
                for c in 0..g.channels {
                    for ky in 0..g.kernel_h {
                        let iy = (oy * g.stride + ky) as isize - pad;
                        for kx in 0..g.kernel_w {
                            let ix = (ox * g.stride + kx) as isize - pad;
                            if iy >= 0 && ix >= 0 && (iy as usize) < g.height && (ix as usize) < g.width {
                                row[idx] = img[(c * g.height + iy as usize) * g.width + ix as usize];
                            }
                            idx += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(cols)
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the input.
pub fn col2im<T: Scalar>(cols: &[T], batch: usize, g: &ConvGeometry) -> Result<Vec<T>> {
    let (oh, ow) = g.output_hw()?;
    let k = g.patch_len();
    assert_eq!(cols.len(), batch * oh * ow * k, "col2im length");
    let mut x = vec![T::zero(); batch * g.input_len()];
    let pad = g.padding as isize;
    for s in 0..batch {
        let img = &mut x[s * g.input_len()..(s + 1) * g.input_len()];
        for oy in 0..oh {
            for ox in 0..ow {
                let row = &cols[((s * oh + oy) * ow + ox) * k..][..k];
                let mut idx = 0;
                for c in 0..g.channels {
                    for ky in 0..g.kernel_h {
                        let iy = (oy * g.stride + ky) as isize - pad;
                        for kx in 0..g.kernel_w {
                            let ix = (ox * g.stride + kx) as isize - pad;
                            if iy >= 0 && ix >= 0 && (iy as usize) < g.height && (ix as usize) < g.width {
                                img[(c * g.height + iy as usize) * g.width + ix as usize] += row[idx];
                            }
                            idx += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(x)
}

/// `[batch * hw, c]` rows to `[batch, c, hw]` planes.
pub(crate) fn rows_to_planes<T: Scalar>(rows: &[T], batch: usize, channels: usize, hw: usize) -> Vec<T> {
    let mut out = vec![T::zero(); rows.len()];
    for s in 0..batch {
        for p in 0..hw {
            for c in 0..channels {
                out[(s * channels + c) * hw + p] = rows[(s * hw + p) * channels + c];
            }
        }
    }
    out
}

/// Inverse of [`rows_to_planes`].
pub(crate) fn planes_to_rows<T: Scalar>(planes: &[T], batch: usize, channels: usize, hw: usize) -> Vec<T> {
    let mut out = vec![T::zero(); planes.len()];
    for s in 0..batch {
        for c in 0..channels {
            for p in 0..hw {
                out[(s * hw + p) * channels + c] = planes[(s * channels + c) * hw + p];
            }
        }
    }
    out
}

/// Cross-correlation with weight `[c_out, c_in, kh, kw]` and bias `[c_out]`.
#[derive(Clone, Debug)]
pub struct Conv2d<T> {
    geometry: ConvGeometry,
    out_channels: usize,
    weight: Param<T>,
    bias: Param<T>,
    cols: Option<(usize, Vec<T>)>,
}

impl<T: Scalar> Conv2d<T> {
    /// Kaiming-uniform weights over `fan_in = c_in * kh * kw`, zero bias.
    pub fn new(geometry: ConvGeometry, out_channels: usize, rng: &mut Rng) -> Result<Self> {
        let fan_in = geometry.patch_len();
        let bound = (6.0 / fan_in as f64).sqrt();
        let w = Tensor::from_fn(
            vec![out_channels, geometry.channels, geometry.kernel_h, geometry.kernel_w],
            |_| T::lit(rng.uniform_range(-bound, bound)),
        )?;
        Self::from_params(geometry, w, Tensor::zeros(vec![out_channels])?)
    }

    pub fn from_params(geometry: ConvGeometry, weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        geometry.output_hw()?;
        let out_channels = weight.shape().first().copied().unwrap_or(0);
        let want = [out_channels, geometry.channels, geometry.kernel_h, geometry.kernel_w];
        if weight.shape() != want || bias.shape() != [out_channels] {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                left: weight.shape().to_vec(),
                right: want.to_vec(),
            });
        }
        Ok(Self {
            geometry,
            out_channels,
            weight: Param::new("weight", weight),
            bias: Param::new("bias", bias),
            cols: None,
        })
    }

    pub fn geometry(&self) -> &ConvGeometry {
        &self.geometry
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    fn input_shape(&self) -> [usize; 3] {
        [self.geometry.channels, self.geometry.height, self.geometry.width]
    }

    fn compute(&self, x: &Tensor<T>) -> Result<(Tensor<T>, usize, Vec<T>)> {
        let b = check_input(x, &self.input_shape(), "conv2d_forward")?;
        let (oh, ow) = self.geometry.output_hw()?;
        let k = self.geometry.patch_len();
        let n = b * oh * ow;
        let co = self.out_channels;
        let cols = im2col(x.data(), b, &self.geometry)?;
        let mut rows = Vec::with_capacity(n * co);
        for _ in 0..n {
            rows.extend_from_slice(self.bias.value.data());
        }
        gemm(T::one(), &cols, (n, k), Op::N, self.weight.value.data(), (co, k), Op::T, T::one(), &mut rows);
        let y = Tensor::new(vec![b, co, oh, ow], rows_to_planes(&rows, b, co, oh * ow))?;
        y.ensure_finite("conv2d_forward")?;
        Ok((y, b, cols))
    }
}

impl<T: Scalar> Layer<T> for Conv2d<T> {
    fn kind(&self) -> &'static str {
        "conv2d"
    }

    fn describe(&self) -> String {
        let g = &self.geometry;
        format!(
            "conv2d {}->{} {}x{} s{} p{}",
            g.channels, self.out_channels, g.kernel_h, g.kernel_w, g.stride, g.padding
        )
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (y, b, cols) = self.compute(x)?;
        self.cols = Some((b, cols));
        Ok(y)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.compute(x)?.0)
    }

    fn backward(&mut self, grad_out: &Tensor<T>, input_grad: bool) -> Result<Option<Tensor<T>>> {
        let (b, cols) = self.cols.as_ref().ok_or_else(|| missing_cache("conv2d"))?;
        let b = *b;
        let (oh, ow) = self.geometry.output_hw()?;
        let co = self.out_channels;
        if grad_out.shape() != [b, co, oh, ow] {
            return Err(Error::ShapeMismatch {
                op: "conv2d_backward",
                left: grad_out.shape().to_vec(),
                right: vec![b, co, oh, ow],
            });
        }
        let n = b * oh * ow;
        let k = self.geometry.patch_len();
        let g = planes_to_rows(grad_out.data(), b, co, oh * ow);
        gemm(T::one(), &g, (n, co), Op::T, cols, (n, k), Op::N, T::one(), self.weight.grad.data_mut());
        let gb = self.bias.grad.data_mut();
        for row in g.chunks(co) {
            for (acc, &v) in gb.iter_mut().zip(row) {
                *acc += v;
            }
        }
        if !input_grad {
            return Ok(None);
        }
        let mut gcols = vec![T::zero(); n * k];
        gemm(T::one(), &g, (n, co), Op::N, self.weight.value.data(), (co, k), Op::N, T::zero(), &mut gcols);
        let gx = col2im(&gcols, b, &self.geometry)?;
        let mut shape = vec![b];
        shape.extend_from_slice(&self.input_shape());
        Ok(Some(Tensor::new(shape, gx)?))
    }

    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input != self.input_shape() {
            return Err(Error::ShapeMismatch {
                op: "conv2d",
                left: input.to_vec(),
                right: self.input_shape().to_vec(),
            });
        }
        let (oh, ow) = self.geometry.output_hw()?;
        Ok(vec![self.out_channels, oh, ow])
    }

    fn count_params(&self) -> usize {
        self.out_channels * self.geometry.patch_len() + self.out_channels
    }

    fn clear_cache(&mut self) {
        self.cols = None;
    }
}
