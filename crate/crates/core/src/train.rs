//! Epoch loops: seeded shuffling, mini-batch SGD and evaluation.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{correct_count, softmax_cross_entropy};
use crate::model::Model;
use crate::optim::Sgd;
use crate::rng::Rng;
use crate::scalar::Scalar;

/// Stream offset separating shuffle generators from initialisation.
const SHUFFLE_STREAM: u64 = 0x5eed;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub train_accuracy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub mean_loss: f64,
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
}

/// Generator for the shuffle of `epoch`; each epoch's order depends only on
/// `(seed, epoch)`.
pub fn epoch_rng(seed: u64, epoch: usize) -> Rng {
    Rng::with_stream(seed, SHUFFLE_STREAM + epoch as u64)
}

/// One pass over `data` in shuffled order, one SGD step per batch. The
/// reported loss and accuracy are averaged over the batches as they are
/// trained, i.e. with the parameters of the moment.
pub fn train_epoch<T: Scalar>(
    model: &mut Model<T>,
    optimizer: &mut Sgd<T>,
    data: &Dataset,
    batch_size: usize,
    seed: u64,
    epoch: usize,
) -> Result<EpochStats> {
    if data.is_empty() {
        return Err(Error::Config("cannot train on an empty dataset".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut rng = epoch_rng(seed, epoch);
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for indices in data.batches(batch_size, Some(&mut rng)) {
        let (x, labels) = data.batch::<T>(&indices, false)?;
        let logits = model.forward(&x)?;
        let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
        correct += correct_count(&logits, &labels);
        loss_sum += loss.as_f64() * indices.len() as f64;
        model.backward(&grad)?;
        optimizer.step(model.params_mut())?;
    }
    model.clear_cache();
    Ok(EpochStats {
        epoch,
        mean_loss: loss_sum / data.len() as f64,
        train_accuracy: correct as f64 / data.len() as f64,
    })
}

/// Mean loss and accuracy of the model on `data`, in dataset order.
pub fn evaluate<T: Scalar>(model: &Model<T>, data: &Dataset, batch_size: usize) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty dataset".into()));
    }
    let mut loss_sum = 0.0;
    let mut correct = 0;
    for indices in data.batches(batch_size.max(1), None) {
        let (x, labels) = data.batch::<T>(&indices, false)?;
        let logits = model.predict(&x)?;
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        loss_sum += loss.as_f64() * indices.len() as f64;
        correct += correct_count(&logits, &labels);
    }
    Ok(Evaluation {
        mean_loss: loss_sum / data.len() as f64,
        accuracy: correct as f64 / data.len() as f64,
        correct,
        total: data.len(),
    })
}
