//! The numeric core: embedding → single LSTM layer → dense softmax head,
//! with cross-entropy loss, exact backpropagation through time, and Adam.
//!
//! All training math runs in `f64` on flat row-major `Vec`s. Gates are
//! packed `[input, forget, candidate, output]` with stride `hidden_dim`.
//! Pad positions are processed by the recurrence like any other step: the
//! pad embedding row starts at zero but is trainable, and pre-padding keeps
//! pads far from the final state that feeds the classifier.
//!
//! Dropout is variational: one Bernoulli(1−p)/(1−p) mask per sequence for
//! the embedded inputs and one for the recurrent hidden input, each fixed
//! across timesteps and replayed exactly during the backward pass.

mod adam;
mod gradcheck;
mod train;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{finite_diff_grads, gradient_check, relative_error, GradCheckReport};
pub use train::{train, LabeledSequence, TrainedModel};

use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, SeedRng};

/// Architecture hyperparameters. `vocab_size` counts the pad and OOV slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    pub window: usize,
}

impl ModelConfig {
    /// Data-independent defaults: 32-dimensional embeddings, 128 hidden
    /// units, 0.2 dropout on both the input and recurrent connections.
    pub fn new(vocab_size: usize, n_classes: usize, window: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: 32,
            hidden_dim: 128,
            n_classes,
            dropout: 0.2,
            recurrent_dropout: 0.2,
            window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, dim) in [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("n_classes", self.n_classes),
            ("window", self.window),
        ] {
            if dim < 1 {
                return Err(Error::InvalidConfig(format!("{name} must be ≥ 1, got {dim}")));
            }
        }
        for (name, rate) in [
            ("dropout", self.dropout),
            ("recurrent_dropout", self.recurrent_dropout),
        ] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in [0, 1), got {rate}"
                )));
            }
        }
        Ok(())
    }
}

/// Optimization hyperparameters. `grad_clip_norm` caps the global gradient
/// norm before each step; it defaults to off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam_alpha: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub grad_clip_norm: Option<f64>,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            epochs: 15,
            batch_size: 32,
            adam_alpha: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            grad_clip_norm: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be ≥ 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch_size must be ≥ 1".into()));
        }
        for (name, beta) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be in (0, 1), got {beta}"
                )));
            }
        }
        if !(self.adam_alpha >= 0.0 && self.adam_alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "adam_alpha must be a finite non-negative real, got {}",
                self.adam_alpha
            )));
        }
        if !(self.adam_epsilon > 0.0 && self.adam_epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "adam_epsilon must be a finite positive real, got {}",
                self.adam_epsilon
            )));
        }
        if let Some(c) = self.grad_clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "grad_clip_norm must be a finite positive real when set, got {c}"
                )));
            }
        }
        Ok(())
    }
}

/// Names of the six parameter tensors, in storage order.
pub const TENSOR_NAMES: [&str; 6] = [
    "embedding",
    "lstm_w",
    "lstm_u",
    "lstm_b",
    "dense_w",
    "dense_b",
];

/// All trainable tensors, row-major. Gradients and Adam moments reuse this
/// shape, so the six-tensor iteration below is the single source of truth
/// for "every parameter".
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// [vocab_size × embed_dim]
    pub embedding: Vec<f64>,
    /// stacked input weights [embed_dim × 4·hidden_dim]
    pub w: Vec<f64>,
    /// stacked recurrent weights [hidden_dim × 4·hidden_dim]
    pub u: Vec<f64>,
    /// stacked gate biases [4·hidden_dim]
    pub b: Vec<f64>,
    /// dense head weights [hidden_dim × n_classes]
    pub w_out: Vec<f64>,
    /// dense head bias [n_classes]
    pub b_out: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(config: &ModelConfig) -> Self {
        let h4 = 4 * config.hidden_dim;
        Self {
            embedding: vec![0.0; config.vocab_size * config.embed_dim],
            w: vec![0.0; config.embed_dim * h4],
            u: vec![0.0; config.hidden_dim * h4],
            b: vec![0.0; h4],
            w_out: vec![0.0; config.hidden_dim * config.n_classes],
            b_out: vec![0.0; config.n_classes],
        }
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("embedding", &self.embedding),
            ("lstm_w", &self.w),
            ("lstm_u", &self.u),
            ("lstm_b", &self.b),
            ("dense_w", &self.w_out),
            ("dense_b", &self.b_out),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Vec<f64>); 6] {
        [
            ("embedding", &mut self.embedding),
            ("lstm_w", &mut self.w),
            ("lstm_u", &mut self.u),
            ("lstm_b", &mut self.b),
            ("dense_w", &mut self.w_out),
            ("dense_b", &mut self.b_out),
        ]
    }

    /// Row/column shape of each tensor under `config`, in storage order.
    pub fn tensor_shapes(config: &ModelConfig) -> [(&'static str, Vec<usize>); 6] {
        let h4 = 4 * config.hidden_dim;
        [
            ("embedding", vec![config.vocab_size, config.embed_dim]),
            ("lstm_w", vec![config.embed_dim, h4]),
            ("lstm_u", vec![config.hidden_dim, h4]),
            ("lstm_b", vec![h4]),
            ("dense_w", vec![config.hidden_dim, config.n_classes]),
            ("dense_b", vec![config.n_classes]),
        ]
    }

    pub fn set_zero(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Euclidean norm over all tensors jointly.
    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Name of the first tensor containing a NaN or infinity, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        self.tensors()
            .iter()
            .find(|(_, t)| t.iter().any(|v| !v.is_finite()))
            .map(|(name, _)| *name)
    }
}

/// Per-sequence dropout masks, fixed across timesteps. Entries are 0 or
/// 1/(1−p), so the expected activation is unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    /// multiplies the embedded input, [embed_dim]
    pub input: Vec<f64>,
    /// multiplies the previous hidden state as it enters the gates, [hidden_dim]
    pub recurrent: Vec<f64>,
}

/// Draw fresh masks for one sequence. With both rates 0 the masks are all
/// ones and training-mode forward matches inference exactly.
pub fn sample_masks(config: &ModelConfig, rng: &mut SeedRng) -> DropoutMasks {
    let draw = |p: f64, n: usize, rng: &mut SeedRng| -> Vec<f64> {
        let keep = 1.0 - p;
        (0..n)
            .map(|_| {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect()
    };
    DropoutMasks {
        input: draw(config.dropout, config.embed_dim, rng),
        recurrent: draw(config.recurrent_dropout, config.hidden_dim, rng),
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    indices: Vec<usize>,
    /// embedded inputs after the input mask, [window × embed_dim]
    x_masked: Vec<f64>,
    /// previous hidden state after the recurrent mask, [window × hidden_dim]
    h_prev_masked: Vec<f64>,
    /// post-activation gates packed i,f,g,o, [window × 4·hidden_dim]
    gates: Vec<f64>,
    /// cell states, [window × hidden_dim]
    c: Vec<f64>,
    /// tanh of the cell states, [window × hidden_dim]
    tanh_c: Vec<f64>,
    /// final hidden state, [hidden_dim]
    h_final: Vec<f64>,
    /// softmax output, [n_classes]
    probs: Vec<f64>,
    /// replayed masks (all ones in inference mode)
    input_mask: Vec<f64>,
    recurrent_mask: Vec<f64>,
}

impl Cache {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Cell state after step `t`; exposed for stability checks.
    pub fn cell_state(&self, t: usize, hidden_dim: usize) -> &[f64] {
        &self.c[t * hidden_dim..(t + 1) * hidden_dim]
    }
}

// --- flat matrix kernels -------------------------------------------------
//
// Row-major throughout. The first two walk matrix rows contiguously
// (axpy-style, auto-vectorizable); the dot-product kernel unrolls into four
// accumulators since strict float semantics forbid reassociating a single
// running sum.

/// out[j] += Σ_k x[k] · w[k·cols + j]   (i.e. out += Wᵀx)
fn matvec_tn(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (k, &xk) in x.iter().enumerate() {
        if xk == 0.0 {
            continue;
        }
        let row = &w[k * cols..(k + 1) * cols];
        for (o, &wkj) in out.iter_mut().zip(row) {
            *o += xk * wkj;
        }
    }
}

/// dw[k·cols + j] += x[k] · dz[j]   (rank-one accumulation)
fn outer_acc(dw: &mut [f64], x: &[f64], dz: &[f64]) {
    let cols = dz.len();
    for (k, &xk) in x.iter().enumerate() {
        if xk == 0.0 {
            continue;
        }
        let row = &mut dw[k * cols..(k + 1) * cols];
        for (d, &z) in row.iter_mut().zip(dz) {
            *d += xk * z;
        }
    }
}

/// out[k] += Σ_j w[k·cols + j] · dz[j]   (i.e. out += W·dz)
fn matvec_nn(w: &[f64], dz: &[f64], out: &mut [f64]) {
    let cols = dz.len();
    for (k, o) in out.iter_mut().enumerate() {
        let row = &w[k * cols..(k + 1) * cols];
        let mut acc = [0.0f64; 4];
        let mut chunks_w = row.chunks_exact(4);
        let mut chunks_z = dz.chunks_exact(4);
        for (cw, cz) in (&mut chunks_w).zip(&mut chunks_z) {
            acc[0] += cw[0] * cz[0];
            acc[1] += cw[1] * cz[1];
            acc[2] += cw[2] * cz[2];
            acc[3] += cw[3] * cz[3];
        }
        let mut tail = 0.0;
        for (&wj, &z) in chunks_w.remainder().iter().zip(chunks_z.remainder()) {
            tail += wj * z;
        }
        *o += (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail;
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax (max subtraction before exponentiation).
fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Draw initial parameters: every weight matrix uniform in
/// ±sqrt(6/(fan_in+fan_out)), biases zero except the forget-gate slice at
/// 1.0, and the pad embedding row zeroed. Deterministic given the seed.
pub fn init_params(config: &ModelConfig, seed: u64) -> Result<ModelParams> {
    config.validate()?;
    Ok(init_params_from_rng(config, &mut rng::seeded(seed)))
}

/// Initialization drawing from a caller-owned stream; [`train`] uses this so
/// one seed drives init, shuffling, and dropout in a single stream.
pub(crate) fn init_params_from_rng(config: &ModelConfig, rng: &mut SeedRng) -> ModelParams {
    let h = config.hidden_dim;
    let mut params = ModelParams::zeros(config);
    let fill = |t: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut SeedRng| {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        t.iter_mut()
            .for_each(|v| *v = rng.random_range(-limit..limit));
    };
    fill(&mut params.embedding, config.vocab_size, config.embed_dim, rng);
    fill(&mut params.w, config.embed_dim, 4 * h, rng);
    fill(&mut params.u, h, 4 * h, rng);
    fill(&mut params.w_out, h, config.n_classes, rng);
    params.embedding[..config.embed_dim].iter_mut().for_each(|v| *v = 0.0);
    params.b[h..2 * h].iter_mut().for_each(|v| *v = 1.0);
    params
}

/// Run the network over one encoded sequence. `masks` must be present
/// exactly in training mode; inference passes `None` and is mask-free.
/// Returns the class probabilities and the activation cache.
pub fn forward(
    params: &ModelParams,
    config: &ModelConfig,
    indices: &[usize],
    masks: Option<&DropoutMasks>,
) -> Result<(Vec<f64>, Cache)> {
    let (t_len, e, h, k) = (config.window, config.embed_dim, config.hidden_dim, config.n_classes);
    if indices.len() != t_len {
        return Err(Error::LengthMismatch {
            what: "sequence tokens",
            expected: t_len,
            got: indices.len(),
        });
    }
    for &idx in indices {
        if idx >= config.vocab_size {
            return Err(Error::IndexOutOfRange {
                index: idx,
                vocab_size: config.vocab_size,
            });
        }
    }
    let ones_e;
    let ones_h;
    let (input_mask, recurrent_mask): (&[f64], &[f64]) = match masks {
        Some(m) => {
            if m.input.len() != e {
                return Err(Error::LengthMismatch {
                    what: "input-mask entries",
                    expected: e,
                    got: m.input.len(),
                });
            }
            if m.recurrent.len() != h {
                return Err(Error::LengthMismatch {
                    what: "recurrent-mask entries",
                    expected: h,
                    got: m.recurrent.len(),
                });
            }
            (&m.input, &m.recurrent)
        }
        None => {
            ones_e = vec![1.0; e];
            ones_h = vec![1.0; h];
            (&ones_e, &ones_h)
        }
    };

    let mut cache = Cache {
        indices: indices.to_vec(),
        x_masked: vec![0.0; t_len * e],
        h_prev_masked: vec![0.0; t_len * h],
        gates: vec![0.0; t_len * 4 * h],
        c: vec![0.0; t_len * h],
        tanh_c: vec![0.0; t_len * h],
        h_final: vec![0.0; h],
        probs: Vec::new(),
        input_mask: input_mask.to_vec(),
        recurrent_mask: recurrent_mask.to_vec(),
    };

    let mut h_state = vec![0.0; h];
    let mut c_state = vec![0.0; h];
    let mut z = vec![0.0; 4 * h];
    for (t, &idx) in indices.iter().enumerate() {
        let x = &mut cache.x_masked[t * e..(t + 1) * e];
        let row = &params.embedding[idx * e..(idx + 1) * e];
        for ((xv, &ev), &m) in x.iter_mut().zip(row).zip(input_mask) {
            *xv = ev * m;
        }
        let hm = &mut cache.h_prev_masked[t * h..(t + 1) * h];
        for ((hv, &pv), &m) in hm.iter_mut().zip(&h_state).zip(recurrent_mask) {
            *hv = pv * m;
        }

        z.copy_from_slice(&params.b);
        matvec_tn(&params.w, x, &mut z);
        matvec_tn(&params.u, hm, &mut z);

        let gates = &mut cache.gates[t * 4 * h..(t + 1) * 4 * h];
        for j in 0..h {
            let i_g = sigmoid(z[j]);
            let f_g = sigmoid(z[h + j]);
            let g_g = z[2 * h + j].tanh();
            let o_g = sigmoid(z[3 * h + j]);
            gates[j] = i_g;
            gates[h + j] = f_g;
            gates[2 * h + j] = g_g;
            gates[3 * h + j] = o_g;
            c_state[j] = f_g * c_state[j] + i_g * g_g;
            let tc = c_state[j].tanh();
            cache.tanh_c[t * h + j] = tc;
            h_state[j] = o_g * tc;
        }
        cache.c[t * h..(t + 1) * h].copy_from_slice(&c_state);
    }
    cache.h_final.copy_from_slice(&h_state);

    let mut logits = params.b_out.clone();
    matvec_tn(&params.w_out, &h_state, &mut logits);
    let probs = softmax(&logits);
    debug_assert_eq!(probs.len(), k);
    cache.probs = probs.clone();
    Ok((probs, cache))
}

/// Log loss of the true class: −ln(p + 1e-12), clamped at zero so a perfect
/// prediction cannot round to a negative loss.
pub fn cross_entropy(probs: &[f64], label: usize) -> f64 {
    (-(probs[label] + 1e-12).ln()).max(0.0)
}

/// Exact gradients of `cross_entropy ∘ forward` for one sequence,
/// accumulated into `grads` (callers zero or reuse the buffer; batch
/// gradients are accumulated here and averaged once per batch).
pub fn backward_into(
    cache: &Cache,
    label: usize,
    params: &ModelParams,
    config: &ModelConfig,
    grads: &mut ModelParams,
) -> Result<()> {
    let (t_len, e, h, k) = (config.window, config.embed_dim, config.hidden_dim, config.n_classes);
    if label >= k {
        return Err(Error::LabelOutOfRange {
            index: label,
            n_classes: k,
        });
    }

    // dense head: d logits = probs − one-hot(label)
    let mut dlogits = cache.probs.clone();
    dlogits[label] -= 1.0;
    for (g, &d) in grads.b_out.iter_mut().zip(&dlogits) {
        *g += d;
    }
    outer_acc(&mut grads.w_out, &cache.h_final, &dlogits);
    let mut dh = vec![0.0; h];
    matvec_nn(&params.w_out, &dlogits, &mut dh);

    // backward through time
    let mut dc = vec![0.0; h];
    let mut dz = vec![0.0; 4 * h];
    let mut dh_prev = vec![0.0; h];
    let mut dx = vec![0.0; e];
    for t in (0..t_len).rev() {
        let gates = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        let tanh_c = &cache.tanh_c[t * h..(t + 1) * h];
        let c_prev: &[f64] = if t > 0 {
            &cache.c[(t - 1) * h..t * h]
        } else {
            &[] // step 0 reads a zero previous cell below
        };
        for j in 0..h {
            let (i_g, f_g, g_g, o_g) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
            let tc = tanh_c[j];
            let cp = if t > 0 { c_prev[j] } else { 0.0 };
            dz[3 * h + j] = dh[j] * tc * o_g * (1.0 - o_g);
            dc[j] += dh[j] * o_g * (1.0 - tc * tc);
            dz[h + j] = dc[j] * cp * f_g * (1.0 - f_g);
            dz[j] = dc[j] * g_g * i_g * (1.0 - i_g);
            dz[2 * h + j] = dc[j] * i_g * (1.0 - g_g * g_g);
            dc[j] *= f_g; // flows to step t−1 through the cell path
        }

        for (g, &d) in grads.b.iter_mut().zip(&dz) {
            *g += d;
        }
        outer_acc(&mut grads.w, &cache.x_masked[t * e..(t + 1) * e], &dz);
        outer_acc(&mut grads.u, &cache.h_prev_masked[t * h..(t + 1) * h], &dz);

        dh_prev.iter_mut().for_each(|v| *v = 0.0);
        matvec_nn(&params.u, &dz, &mut dh_prev);
        for (v, &m) in dh_prev.iter_mut().zip(&cache.recurrent_mask) {
            *v *= m;
        }
        std::mem::swap(&mut dh, &mut dh_prev);

        dx.iter_mut().for_each(|v| *v = 0.0);
        matvec_nn(&params.w, &dz, &mut dx);
        let erow = &mut grads.embedding[cache.indices[t] * e..(cache.indices[t] + 1) * e];
        for ((g, &d), &m) in erow.iter_mut().zip(&dx).zip(&cache.input_mask) {
            *g += d * m;
        }
    }
    Ok(())
}

/// Allocating wrapper around [`backward_into`]: gradients for one sequence.
pub fn backward(
    cache: &Cache,
    label: usize,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<ModelParams> {
    let mut grads = ModelParams::zeros(config);
    backward_into(cache, label, params, config, &mut grads)?;
    Ok(grads)
}

/// Inference over a batch, order-preserving, no dropout.
pub fn predict_proba(
    records: &[Vec<usize>],
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<Vec<Vec<f64>>> {
    records
        .iter()
        .map(|r| forward(params, config, r, None).map(|(p, _)| p))
        .collect()
}

/// Parallel inference: splits the batch into up to `threads` contiguous
/// chunks scored concurrently. Output order and values are identical to
/// [`predict_proba`] — params are read-only and per-record passes share
/// nothing mutable.
pub fn predict_proba_threaded(
    records: &[Vec<usize>],
    params: &ModelParams,
    config: &ModelConfig,
    threads: usize,
) -> Result<Vec<Vec<f64>>> {
    if threads <= 1 || records.len() <= 1 {
        return predict_proba(records, params, config);
    }
    let threads = threads.min(records.len());
    let chunk_size = records.len().div_ceil(threads);
    let results: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = records
            .chunks(chunk_size)
            .map(|chunk| scope.spawn(move || predict_proba(chunk, params, config)))
            .collect();
        handles.into_iter().map(|jh| jh.join().expect("prediction thread panicked")).collect()
    });
    let mut out = Vec::with_capacity(records.len());
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}
