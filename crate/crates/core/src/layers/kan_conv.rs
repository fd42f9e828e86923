//! KAN convolution: every kernel position carries its own spline, and each
//! output pixel is the sum of those splines applied to its window. This is
//! exactly a KAN linear layer (`in = c_in * kh * kw`, `out = c_out`) applied
//! to every extracted patch, which is how it is computed here.

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

use super::conv::{col2im, im2col, planes_to_rows, rows_to_planes, ConvGeometry};
use super::{check_input, missing_cache, KanConfig, KanLinear, Layer, Param};

#[derive(Clone, Debug)]
pub struct KanConv2d<T> {
    geometry: ConvGeometry,
    kernel: KanLinear<T>,
    batch: Option<usize>,
}

impl<T: Scalar> KanConv2d<T> {
    pub fn new(geometry: ConvGeometry, out_channels: usize, config: KanConfig, rng: &mut Rng) -> Result<Self> {
        geometry.output_hw()?;
        let kernel = KanLinear::new(geometry.patch_len(), out_channels, config, rng)?;
        Ok(Self {
            geometry,
            kernel,
            batch: None,
        })
    }

    /// Wraps an existing patch-level KAN layer; its input width must be
    /// `c_in * kh * kw`.
    pub fn from_kernel(geometry: ConvGeometry, kernel: KanLinear<T>) -> Result<Self> {
        geometry.output_hw()?;
        if kernel.in_features() != geometry.patch_len() {
            return Err(Error::ShapeMismatch {
                op: "kan_conv2d",
                left: vec![kernel.in_features()],
                right: vec![geometry.patch_len()],
            });
        }
        Ok(Self {
            geometry,
            kernel,
            batch: None,
        })
    }

    pub fn kernel(&self) -> &KanLinear<T> {
        &self.kernel
    }

    pub fn geometry(&self) -> &ConvGeometry {
        &self.geometry
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.out_features()
    }

    fn input_shape(&self) -> [usize; 3] {
        [self.geometry.channels, self.geometry.height, self.geometry.width]
    }

    fn patches(&self, x: &Tensor<T>) -> Result<(usize, Tensor<T>)> {
        let b = check_input(x, &self.input_shape(), "kan_conv2d_forward")?;
        let (oh, ow) = self.geometry.output_hw()?;
        let cols = im2col(x.data(), b, &self.geometry)?;
        Ok((b, Tensor::new(vec![b * oh * ow, self.geometry.patch_len()], cols)?))
    }

    fn to_planes(&self, rows: Tensor<T>, b: usize) -> Result<Tensor<T>> {
        let (oh, ow) = self.geometry.output_hw()?;
        let co = self.out_channels();
        Tensor::new(vec![b, co, oh, ow], rows_to_planes(rows.data(), b, co, oh * ow))
    }
}

impl<T: Scalar> Layer<T> for KanConv2d<T> {
    fn kind(&self) -> &'static str {
        "kan_conv2d"
    }

    fn describe(&self) -> String {
        let g = &self.geometry;
        let c = self.kernel.config();
        format!(
            "kan_conv2d {}->{} {}x{} s{} p{} G={} k={}",
            g.channels,
            self.out_channels(),
            g.kernel_h,
            g.kernel_w,
            g.stride,
            g.padding,
            c.grid_size,
            c.degree
        )
    }

    fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, patches) = self.patches(x)?;
        let rows = self.kernel.forward(&patches)?;
        self.batch = Some(b);
        self.to_planes(rows, b)
    }

    fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, patches) = self.patches(x)?;
        let rows = self.kernel.infer(&patches)?;
        self.to_planes(rows, b)
    }

    fn backward(&mut self, grad_out: &Tensor<T>, input_grad: bool) -> Result<Option<Tensor<T>>> {
        let b = self.batch.ok_or_else(|| missing_cache("kan_conv2d"))?;
        let (oh, ow) = self.geometry.output_hw()?;
        let co = self.out_channels();
        if grad_out.shape() != [b, co, oh, ow] {
            return Err(Error::ShapeMismatch {
                op: "kan_conv2d_backward",
                left: grad_out.shape().to_vec(),
                right: vec![b, co, oh, ow],
            });
        }
        let rows = Tensor::new(vec![b * oh * ow, co], planes_to_rows(grad_out.data(), b, co, oh * ow))?;
        let Some(gcols) = self.kernel.backward(&rows, input_grad)? else {
            return Ok(None);
        };
        let gx = col2im(gcols.data(), b, &self.geometry)?;
        let mut shape = vec![b];
        shape.extend_from_slice(&self.input_shape());
        Ok(Some(Tensor::new(shape, gx)?))
    }

    fn params(&self) -> Vec<&Param<T>> {
        self.kernel.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.kernel.params_mut()
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input != self.input_shape() {
            return Err(Error::ShapeMismatch {
                op: "kan_conv2d",
                left: input.to_vec(),
                right: self.input_shape().to_vec(),
            });
        }
        let (oh, ow) = self.geometry.output_hw()?;
        Ok(vec![self.out_channels(), oh, ow])
    }

    fn count_params(&self) -> usize {
        self.kernel.count_params()
    }

    fn clear_cache(&mut self) {
        self.batch = None;
        self.kernel.clear_cache();
    }
}
