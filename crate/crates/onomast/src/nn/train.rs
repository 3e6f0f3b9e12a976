//! Minibatch training: per-epoch shuffling, mean batch gradients, one Adam
//! step per batch, fresh dropout masks per sequence.

use super::{
    adam_step, backward_into, cross_entropy, forward, init_params_from_rng, sample_masks,
    AdamState, ModelConfig, ModelParams, TrainConfig,
};
use crate::error::{Error, Result};
use crate::rng;

/// One training example: encoded token indices plus the class index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSequence {
    pub indices: Vec<usize>,
    pub label: usize,
}

/// Final parameters plus the mean training loss of each epoch.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: ModelParams,
    pub loss_history: Vec<f64>,
}

/// Fit a fresh model on the examples. One seed drives initialization, the
/// per-epoch shuffles, and every dropout mask, so equal inputs give
/// bit-identical parameters. Gradients are averaged over each minibatch;
/// `grad_clip_norm`, when set, rescales each averaged gradient to that
/// global norm before the Adam step.
pub fn train(
    examples: &[LabeledSequence],
    config: &ModelConfig,
    tconfig: &TrainConfig,
) -> Result<TrainedModel> {
    config.validate()?;
    tconfig.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    for ex in examples {
        if ex.label >= config.n_classes {
            return Err(Error::LabelOutOfRange {
                index: ex.label,
                n_classes: config.n_classes,
            });
        }
        if ex.indices.len() != config.window {
            return Err(Error::LengthMismatch {
                what: "sequence tokens",
                expected: config.window,
                got: ex.indices.len(),
            });
        }
    }

    let mut rng = rng::seeded(tconfig.seed);
    let mut params = init_params_from_rng(config, &mut rng);
    let mut state = AdamState::new(config);
    let mut grads = ModelParams::zeros(config);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_history = Vec::with_capacity(tconfig.epochs);

    for _epoch in 0..tconfig.epochs {
        rng::shuffle(&mut order, &mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(tconfig.batch_size) {
            grads.set_zero();
            for &i in batch {
                let ex = &examples[i];
                let masks = sample_masks(config, &mut rng);
                let (probs, cache) = forward(&params, config, &ex.indices, Some(&masks))?;
                epoch_loss += cross_entropy(&probs, ex.label);
                backward_into(&cache, ex.label, &params, config, &mut grads)?;
            }
            grads.scale(1.0 / batch.len() as f64);
            if let Some(max_norm) = tconfig.grad_clip_norm {
                let norm = grads.global_norm();
                if norm > max_norm {
                    grads.scale(max_norm / norm);
                }
            }
            adam_step(&mut params, &grads, &mut state, tconfig)?;
        }
        loss_history.push(epoch_loss / examples.len() as f64);
    }

    Ok(TrainedModel {
        params,
        loss_history,
    })
}
