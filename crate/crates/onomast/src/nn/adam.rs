//! Bias-corrected Adam updates over the six parameter tensors.

use super::{ModelConfig, ModelParams, TrainConfig};
use crate::error::{Error, Result};

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: ModelParams,
    v: ModelParams,
    t: u64,
}

impl AdamState {
    pub fn new(config: &ModelConfig) -> Self {
        Self {
            m: ModelParams::zeros(config),
            v: ModelParams::zeros(config),
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One in-place update: m ← β₁m + (1−β₁)g, v ← β₂v + (1−β₂)g², then
/// p ← p − α·m̂/(√v̂ + ε) with the standard 1/(1−βᵗ) bias corrections.
/// A NaN or infinite gradient aborts with the offending tensor's name.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    tconfig: &TrainConfig,
) -> Result<()> {
    if let Some(tensor) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient { tensor });
    }
    state.t += 1;
    let t = state.t as f64;
    let (b1, b2) = (tconfig.adam_beta1, tconfig.adam_beta2);
    let corr1 = 1.0 - b1.powf(t);
    let corr2 = 1.0 - b2.powf(t);
    let alpha = tconfig.adam_alpha;
    let eps = tconfig.adam_epsilon;

    for (((_, p), (_, m)), ((_, v), (_, g))) in params
        .tensors_mut()
        .into_iter()
        .zip(state.m.tensors_mut())
        .zip(state.v.tensors_mut().into_iter().zip(grads.tensors()))
    {
        for ((pj, mj), (vj, &gj)) in p.iter_mut().zip(m.iter_mut()).zip(v.iter_mut().zip(g.iter()))
        {
            *mj = b1 * *mj + (1.0 - b1) * gj;
            *vj = b2 * *vj + (1.0 - b2) * gj * gj;
            let m_hat = *mj / corr1;
            let v_hat = *vj / corr2;
            *pj -= alpha * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
