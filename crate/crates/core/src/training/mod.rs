//! Loss, optimizer, batching and the training loop.

mod adadelta;
mod checkpoint;
mod trainer;

use synsrl_tensor::{Graph, Rng, Scalar, Tensor, Var};

pub use adadelta::Adadelta;
pub use checkpoint::{load_model, CHECKPOINT_FILES};
pub use trainer::{corpus_loss, evaluate, TrainSummary, Trainer};

use crate::error::{Error, Result};

/// Smoothed target distribution: `1 - eps` on the gold class and
/// `eps / (L - 1)` on every other class.
pub fn smoothed_targets<T: Scalar>(targets: &[usize], classes: usize, eps: f64) -> Result<Tensor<T>> {
    let off = if classes > 1 { eps / (classes - 1) as f64 } else { 0.0 };
    let on = if classes > 1 { 1.0 - eps } else { 1.0 };
    let mut data = vec![T::from_f64(off); targets.len() * classes];
    for (i, &t) in targets.iter().enumerate() {
        if t >= classes {
            return Err(Error::TargetOutOfRange { target: t, classes });
        }
        data[i * classes + t] = T::from_f64(on);
    }
    Ok(Tensor::new(vec![targets.len(), classes], data)?)
}

/// Cross-entropy against the smoothed targets, summed over tokens.
pub fn smoothed_cross_entropy_sum<T: Scalar>(g: &Graph<T>, logits: Var, targets: &[usize], eps: f64) -> Result<Var> {
    let shape = g.shape(logits);
    if shape.len() != 2 || shape[0] != targets.len() {
        return Err(synsrl_tensor::TensorError::ShapeMismatch {
            op: "cross_entropy",
            left: shape,
            right: vec![targets.len()],
        }
        .into());
    }
    let q = g.constant(smoothed_targets(targets, shape[1], eps)?);
    let weighted = g.mul(g.log_softmax(logits), q)?;
    Ok(g.scale(g.sum(weighted), T::from_f64(-1.0)))
}

/// Mean over tokens of the label-smoothed cross-entropy.
pub fn label_smoothed_cross_entropy<T: Scalar>(g: &Graph<T>, logits: Var, targets: &[usize], eps: f64) -> Result<Var> {
    let sum = smoothed_cross_entropy_sum(g, logits, targets, eps)?;
    Ok(g.scale(sum, T::from_f64(1.0 / targets.len().max(1) as f64)))
}

/// Instance indices of one batch and their word total.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub items: Vec<usize>,
    pub words: usize,
}

/// Shuffles instance indices and packs them greedily so that each batch
/// holds at most `budget` words. An instance longer than the budget gets a
/// batch of its own.
pub fn make_batches(words: &[usize], budget: usize, rng: &mut Rng) -> Vec<Batch> {
    let mut order: Vec<usize> = (0..words.len()).collect();
    rng.shuffle(&mut order);
    let mut batches = Vec::new();
    let mut current = Batch {
        items: Vec::new(),
        words: 0,
    };
    for i in order {
        if !current.items.is_empty() && current.words + words[i] > budget {
            batches.push(std::mem::replace(
                &mut current,
                Batch {
                    items: Vec::new(),
                    words: 0,
                },
            ));
        }
        current.items.push(i);
        current.words += words[i];
    }
    if !current.items.is_empty() {
        batches.push(current);
    }
    batches
}
