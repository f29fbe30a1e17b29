//! Multi-instance pretraining: every video is a bag of frames, labeled only
//! with its action set. For each class the bag score is the max-pooled sigmoid
//! `max_t f_c(x_t)`, trained with binary cross-entropy against `1(c in C_v)`.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::domain::{ActionSet, FrameFeatures};
use crate::error::{Error, Result};
use crate::scorer::mlp::{backward, forward_pass, log_sigmoid, sgd_step, MlpGrads, MlpParams};

/// Bag-level loss and gradients for one video.
pub fn mil_loss(params: &MlpParams, x: &FrameFeatures, set: &ActionSet) -> Result<(f64, MlpGrads)> {
    let pass = forward_pass(params, x)?;
    let logits = &pass.scores.logits;
    let (classes, frames) = logits.dim();
    let mut dlogits = Array2::<f64>::zeros((classes, frames));
    let mut loss = 0.0;
    let norm = 1.0 / classes as f64;
    for c in 0..classes {
        let row = logits.row(c);
        let (arg, &z) = row
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |best, cur| if *cur.1 > *best.1 { cur } else { best });
        let present = set.contains(crate::domain::ActionId(c));
        // -log sigmoid(z) for positives, -log sigmoid(-z) for negatives.
        loss -= if present { log_sigmoid(z) } else { log_sigmoid(-z) };
        let target = if present { 1.0 } else { 0.0 };
        dlogits[[c, arg]] = norm * (crate::scorer::mlp::sigmoid(z) - target);
    }
    Ok((loss * norm, backward(params, x, &pass, &dlogits)))
}

/// Max-pooled presence prediction per class: `max_t f_c(x_t) > 0.5`.
pub fn predict_presence(params: &MlpParams, x: &FrameFeatures) -> Result<Vec<bool>> {
    let pass = forward_pass(params, x)?;
    Ok(pass
        .scores
        .logits
        .rows()
        .into_iter()
        .map(|row| row.iter().any(|&z| z > 0.0))
        .collect())
}

/// SGD over shuffled videos, one step per video.
pub fn mil_pretrain<R: Rng + ?Sized>(
    params: &mut MlpParams,
    corpus: &[(&FrameFeatures, &ActionSet)],
    epochs: usize,
    lr: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut epoch_losses = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for &v in &order {
            let (x, set) = corpus[v];
            let (loss, grads) = mil_loss(params, x, set)?;
            sgd_step(params, &grads, lr)?;
            total += loss;
        }
        epoch_losses.push(total / corpus.len() as f64);
    }
    Ok(epoch_losses)
}
