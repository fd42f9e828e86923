//! Uniform-knot B-spline bases.
//!
//! A basis with `G` grid intervals over `[lo, hi]` and degree `k` has knots
//! `t_i = lo + (i - k) h` for `i = 0..=G + 2k`, `h = (hi - lo) / G`, and
//! `G + k` basis functions `B_{j,k}`. Basis `j` is supported on
//! `[t_j, t_{j+k+1}]`, so on grid interval `m` only `B_{m..=m+k}` are
//! nonzero. Inputs outside `[lo, hi]` are clamped to the boundary.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 15;

/// Default spline input range; data is normalised into it.
pub const DEFAULT_RANGE: (f64, f64) = (-1.0, 1.0);

#[derive(Clone, Debug, PartialEq)]
pub struct SplineBasis<T> {
    grid_size: usize,
    degree: usize,
    lo: T,
    hi: T,
    step: T,
    knots: Vec<T>,
}

impl<T: Scalar> SplineBasis<T> {
    pub fn new(grid_size: usize, degree: usize, range: (T, T)) -> Result<Self> {
        let (lo, hi) = range;
        if grid_size == 0 {
            return Err(Error::InvalidSpline("grid size must be at least 1".into()));
        }
        if degree > MAX_DEGREE {
            return Err(Error::InvalidSpline(format!(
                "degree {degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidSpline(format!("empty range [{lo}, {hi}]")));
        }
        let step = (hi - lo) / T::from_usize_lossy(grid_size);
        let k = degree as isize;
        let knots = (0..grid_size + 2 * degree + 1)
            .map(|i| lo + T::lit((i as isize - k) as f64) * step)
            .collect();
        Ok(Self {
            grid_size,
            degree,
            lo,
            hi,
            step,
            knots,
        })
    }

    /// Basis over the default range `[-1, 1]`.
    pub fn with_default_range(grid_size: usize, degree: usize) -> Result<Self> {
        Self::new(
            grid_size,
            degree,
            (T::lit(DEFAULT_RANGE.0), T::lit(DEFAULT_RANGE.1)),
        )
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_basis(&self) -> usize {
        self.grid_size + self.degree
    }

    pub fn range(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    /// Knot spacing `h`.
    pub fn step(&self) -> T {
        self.step
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Clamped input and its grid interval in `0..G`.
    #[inline]
    fn locate(&self, x: T) -> (T, usize) {
        let x = x.max(self.lo).min(self.hi);
        let raw = ((x - self.lo) / self.step).floor();
        let m = raw.to_usize().unwrap_or(0).min(self.grid_size - 1);
        (x, m)
    }

    /// Evaluates the `k + 1` nonzero basis values at `x` (clamped) into
    /// `vals[..=k]` and returns the global index of `vals[0]`.
    ///
    /// When `ders` is given, the derivatives of the same bases are written
    /// into `ders[..=k]`; they are zero when `x` lies outside the range
    /// (derivative of the clamp). Requires `degree >= 1` for derivatives.
    #[inline]
    pub fn eval_local(&self, x: T, vals: &mut [T], ders: Option<&mut [T]>) -> usize {
        let k = self.degree;
        let (xc, m) = self.locate(x);
        let span = m + k;
        let t = &self.knots;
        let mut left = [T::zero(); MAX_DEGREE + 1];
        let mut right = [T::zero(); MAX_DEGREE + 1];
        let mut lower = [T::zero(); MAX_DEGREE + 1];
        vals[0] = T::one();
        for j in 1..=k {
            if j == k {
                lower[..k].copy_from_slice(&vals[..k]);
            }
            left[j] = xc - t[span + 1 - j];
            right[j] = t[span + j] - xc;
            let mut saved = T::zero();
            for r in 0..j {
                let tmp = vals[r] / (right[r + 1] + left[j - r]);
                vals[r] = saved + right[r + 1] * tmp;
                saved = left[j - r] * tmp;
            }
            vals[j] = saved;
        }
        if let Some(ders) = ders {
            debug_assert!(k >= 1, "derivative of a degree-0 basis");
            if x < self.lo || x > self.hi {
                ders[..=k].iter_mut().for_each(|d| *d = T::zero());
            } else {
                // dB_{g,k} = k/(t_{g+k}-t_g) B_{g,k-1} - k/(t_{g+k+1}-t_{g+1}) B_{g+1,k-1},
                // with the degree k-1 values for g = span-k+1..=span held in `lower`.
                let kf = T::from_usize_lossy(k);
                let first = span - k;
                for q in 0..=k {
                    let g = first + q;
                    let mut d = T::zero();
                    if q >= 1 {
                        d += kf / (t[g + k] - t[g]) * lower[q - 1];
                    }
                    if q < k {
                        d -= kf / (t[g + k + 1] - t[g + 1]) * lower[q];
                    }
                    ders[q] = d;
                }
            }
        }
        span - k
    }

    fn check_input(x: T) -> Result<()> {
        if x.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { op: "basis_eval" })
        }
    }

    /// Dense vector of all `G + k` basis values at `x`.
    pub fn basis_eval(&self, x: T) -> Result<Vec<T>> {
        let mut out = vec![T::zero(); self.num_basis()];
        self.basis_eval_into(x, &mut out)?;
        Ok(out)
    }

    /// Writes all basis values at `x` into `out` (length `G + k`).
    pub fn basis_eval_into(&self, x: T, out: &mut [T]) -> Result<()> {
        Self::check_input(x)?;
        let mut local = [T::zero(); MAX_DEGREE + 1];
        let first = self.eval_local(x, &mut local, None);
        out.iter_mut().for_each(|v| *v = T::zero());
        out[first..=first + self.degree].copy_from_slice(&local[..=self.degree]);
        Ok(())
    }

    /// Dense vector of basis derivatives `dB_j/dx` at `x`.
    pub fn basis_derivative(&self, x: T) -> Result<Vec<T>> {
        if self.degree == 0 {
            return Err(Error::UnsupportedDegree(0));
        }
        Self::check_input(x)?;
        let mut vals = [T::zero(); MAX_DEGREE + 1];
        let mut ders = [T::zero(); MAX_DEGREE + 1];
        let first = self.eval_local(x, &mut vals, Some(&mut ders));
        let mut out = vec![T::zero(); self.num_basis()];
        out[first..=first + self.degree].copy_from_slice(&ders[..=self.degree]);
        Ok(out)
    }

    /// Basis expansion of every element: output shape is `x.shape() ++ [G + k]`.
    pub fn basis_eval_batch(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let nb = self.num_basis();
        let mut out = vec![T::zero(); x.len() * nb];
        for (&v, row) in x.data().iter().zip(out.chunks_mut(nb)) {
            self.basis_eval_into(v, row)?;
        }
        let mut shape = x.shape().to_vec();
        shape.push(nb);
        Tensor::new(shape, out)
    }

    /// Greville abscissae `(t_{j+1} + .. + t_{j+k}) / k`; the coefficients
    /// that reproduce the identity function exactly for `k >= 1`.
    pub fn greville(&self) -> Vec<T> {
        let k = self.degree;
        (0..self.num_basis())
            .map(|j| {
                if k == 0 {
                    (self.knots[j] + self.knots[j + 1]) / T::lit(2.0)
                } else {
                    let s: T = self.knots[j + 1..=j + k].iter().copied().sum();
                    s / T::from_usize_lossy(k)
                }
            })
            .collect()
    }
}

/// A spline `phi(x) = sum_j c_j B_j(x)` over a fixed basis.
#[derive(Clone, Debug, PartialEq)]
pub struct UnivariateFunction<T> {
    basis: SplineBasis<T>,
    coeffs: Vec<T>,
}

impl<T: Scalar> UnivariateFunction<T> {
    pub fn new(basis: SplineBasis<T>, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.len() != basis.num_basis() {
            return Err(Error::ShapeMismatch {
                op: "univariate_function",
                left: vec![basis.num_basis()],
                right: vec![coeffs.len()],
            });
        }
        Ok(Self { basis, coeffs })
    }

    /// The spline equal to `x` on the basis range (degree >= 1).
    pub fn identity(basis: SplineBasis<T>) -> Result<Self> {
        if basis.degree() == 0 {
            return Err(Error::UnsupportedDegree(0));
        }
        let c = basis.greville();
        Self::new(basis, c)
    }

    pub fn basis(&self) -> &SplineBasis<T> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn apply(&self, x: T) -> Result<T> {
        let b = self.basis.basis_eval(x)?;
        Ok(b.iter().zip(&self.coeffs).map(|(&b, &c)| b * c).sum())
    }

    pub fn derivative(&self, x: T) -> Result<T> {
        let d = self.basis.basis_derivative(x)?;
        Ok(d.iter().zip(&self.coeffs).map(|(&d, &c)| d * c).sum())
    }
}
