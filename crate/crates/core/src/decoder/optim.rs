//! AdamW with decoupled weight decay, applied to the soft prompt only.

use serde::{Deserialize, Serialize};

use super::prompt::SoftPrompt;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 0.3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment accumulators and the number of applied updates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            m: vec![vec![0.0; cols]; rows],
            v: vec![vec![0.0; cols]; rows],
            step: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// The gradient had NaN/Inf entries; nothing was changed.
    SkippedNonFinite,
}

/// One AdamW update in place. `step` is the 1-based step number after increment.
///
/// ```text
/// w ← w·(1 − lr·wd)
/// m ← β1·m + (1−β1)·g        v ← β2·v + (1−β2)·g²
/// w ← w − lr · (m / (1−β1^t)) / (√(v / (1−β2^t)) + ε)
/// ```
pub fn adamw_update(w: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], step: u64, cfg: &AdamWConfig) {
    let t = step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let decay = 1.0 - cfg.lr * cfg.weight_decay;
    for i in 0..w.len() {
        w[i] *= decay;
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        w[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

/// Apply one update to `soft` with gradient `grad` (same shape as the prompt).
pub fn optimize_step(soft: &mut SoftPrompt, grad: &[Vec<f64>], cfg: &AdamWConfig) -> Result<StepOutcome> {
    if grad.len() != soft.embeddings.len()
        || grad.iter().zip(&soft.embeddings).any(|(g, e)| g.len() != e.len())
    {
        return Err(Error::Internal("gradient shape does not match the soft prompt".into()));
    }
    if grad.iter().flatten().any(|g| !g.is_finite()) {
        log::warn!("non-finite soft-prompt gradient; update skipped");
        return Ok(StepOutcome::SkippedNonFinite);
    }
    let state = &mut soft.state;
    state.step += 1;
    for (r, g) in grad.iter().enumerate() {
        adamw_update(
            &mut soft.embeddings[r],
            g,
            &mut state.m[r],
            &mut state.v[r],
            state.step,
            cfg,
        );
    }
    Ok(StepOutcome::Applied)
}
