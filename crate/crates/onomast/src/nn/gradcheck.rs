//! Verification harness: backpropagation vs. central finite differences.
//!
//! The comparison metric is a per-tensor norm ratio,
//! ‖a − n‖₂ / (‖a‖₂ + ‖n‖₂), rather than an elementwise quotient: central
//! differences carry ~1e-10 of absolute noise per entry, so ratios at
//! near-zero entries are meaningless while the norm ratio stays sharp — an
//! implementation error anywhere in a tensor lifts its whole ratio far above
//! the thresholds used here.

use rand::RngExt;

use super::{
    backward, cross_entropy, forward, init_params_from_rng, sample_masks, DropoutMasks,
    ModelConfig, ModelParams,
};
use crate::error::Result;
use crate::rng;

/// Per-tensor relative errors plus their maximum.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub per_tensor: Vec<(&'static str, f64)>,
    pub max_relative_error: f64,
}

fn l2(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// ‖a − n‖₂ / (‖a‖₂ + ‖n‖₂); zero when both slices are zero.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let denom = l2(analytic) + l2(numeric);
    if denom == 0.0 {
        return 0.0;
    }
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n) * (a - n))
        .sum::<f64>()
        .sqrt();
    diff / denom
}

fn loss_at(
    params: &ModelParams,
    config: &ModelConfig,
    indices: &[usize],
    label: usize,
    masks: Option<&DropoutMasks>,
) -> Result<f64> {
    let (probs, _) = forward(params, config, indices, masks)?;
    Ok(cross_entropy(&probs, label))
}

fn entry_mut(params: &mut ModelParams, tensor: usize, j: usize) -> &mut f64 {
    match tensor {
        0 => &mut params.embedding[j],
        1 => &mut params.w[j],
        2 => &mut params.u[j],
        3 => &mut params.b[j],
        4 => &mut params.w_out[j],
        5 => &mut params.b_out[j],
        _ => unreachable!("six tensors"),
    }
}

/// Numerical gradient of the per-sequence loss by central differences:
/// (L(θ+h) − L(θ−h)) / 2h for every entry of every tensor, replaying the
/// given masks at each evaluation.
pub fn finite_diff_grads(
    params: &ModelParams,
    config: &ModelConfig,
    indices: &[usize],
    label: usize,
    masks: Option<&DropoutMasks>,
    step: f64,
) -> Result<ModelParams> {
    let mut work = params.clone();
    let mut numeric = ModelParams::zeros(config);
    for tensor in 0..6 {
        let len = params.tensors()[tensor].1.len();
        for j in 0..len {
            let orig = params.tensors()[tensor].1[j];
            *entry_mut(&mut work, tensor, j) = orig + step;
            let plus = loss_at(&work, config, indices, label, masks)?;
            *entry_mut(&mut work, tensor, j) = orig - step;
            let minus = loss_at(&work, config, indices, label, masks)?;
            *entry_mut(&mut work, tensor, j) = orig;
            *entry_mut(&mut numeric, tensor, j) = (plus - minus) / (2.0 * step);
        }
    }
    Ok(numeric)
}

/// Build a random model from the seed, push one random sequence through it,
/// and compare backpropagation against finite differences (step 1e-5) on
/// every tensor. Masks are drawn once and replayed at every evaluation; with
/// both dropout rates zero the run is mask-free.
pub fn gradient_check(config: &ModelConfig, seed: u64) -> Result<GradCheckReport> {
    config.validate()?;
    let mut rng = rng::seeded(seed);
    let params = init_params_from_rng(config, &mut rng);
    let indices: Vec<usize> = (0..config.window)
        .map(|_| rng.random_range(0..config.vocab_size))
        .collect();
    let label = rng.random_range(0..config.n_classes);
    let masks = if config.dropout > 0.0 || config.recurrent_dropout > 0.0 {
        Some(sample_masks(config, &mut rng))
    } else {
        None
    };

    let (_, cache) = forward(&params, config, &indices, masks.as_ref())?;
    let analytic = backward(&cache, label, &params, config)?;
    let numeric = finite_diff_grads(&params, config, &indices, label, masks.as_ref(), 1e-5)?;

    let per_tensor: Vec<(&'static str, f64)> = analytic
        .tensors()
        .iter()
        .zip(numeric.tensors())
        .map(|((name, a), (_, n))| (*name, relative_error(a, n)))
        .collect();
    let max_relative_error = per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport {
        per_tensor,
        max_relative_error,
    })
}
