//! Plain stochastic gradient descent with a constant learning rate.

use std::marker::PhantomData;

use crate::error::{Error, Result};
use crate::layers::Param;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct Sgd<T> {
    learning_rate: f64,
    step_count: u64,
    _scalar: PhantomData<T>,
}

impl<T: Scalar> Sgd<T> {
    pub fn new(learning_rate: f64) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(Error::Config(format!("learning rate {learning_rate} must be finite and >= 0")));
        }
        Ok(Self {
            learning_rate,
            step_count: 0,
            _scalar: PhantomData,
        })
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// `p <- p - lr * g` for every parameter, then zeroes the gradients.
    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Param<T>>) -> Result<()> {
        let lr = T::lit(-self.learning_rate);
        for p in params {
            if p.grad.shape() != p.value.shape() {
                return Err(Error::ShapeMismatch {
                    op: "sgd_step",
                    left: p.value.shape().to_vec(),
                    right: p.grad.shape().to_vec(),
                });
            }
            p.value.axpy(lr, &p.grad)?;
            p.zero_grad();
        }
        self.step_count += 1;
        Ok(())
    }
}
