//! Softmax cross-entropy and classification accuracy.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Mean negative log-softmax of the true class over the batch, with the
/// gradient `(softmax - onehot) / batch`. Stabilised by subtracting each
/// row's maximum.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    if logits.rank() != 2 || logits.dim(0) != labels.len() {
        return Err(Error::ShapeMismatch {
            op: "softmax_cross_entropy",
            left: logits.shape().to_vec(),
            right: vec![labels.len()],
        });
    }
    logits.ensure_finite("softmax_cross_entropy")?;
    let (b, c) = (logits.dim(0), logits.dim(1));
    let bf = T::from_usize_lossy(b);
    let mut grad = vec![T::zero(); b * c];
    let mut total = T::zero();
    for (s, (row, &y)) in logits.data().chunks(c).zip(labels).enumerate() {
        if y >= c {
            return Err(Error::LabelOutOfRange { label: y, classes: c });
        }
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let sum: T = row.iter().map(|&v| (v - m).exp()).sum();
        let log_z = m + sum.ln();
        total += log_z - row[y];
        let g = &mut grad[s * c..(s + 1) * c];
        for (gv, &v) in g.iter_mut().zip(row) {
            *gv = (v - log_z).exp() / bf;
        }
        g[y] -= T::one() / bf;
    }
    Ok((total / bf, Tensor::new(vec![b, c], grad)?))
}

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
pub fn accuracy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> f64 {
    correct_count(logits, labels) as f64 / labels.len().max(1) as f64
}

pub fn correct_count<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> usize {
    logits
        .argmax_rows()
        .iter()
        .zip(labels)
        .filter(|(p, y)| p == y)
        .count()
}
