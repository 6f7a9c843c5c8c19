//! Cross-entropy losses, their weighted total and the soft-prompt gradient.
//!
//! The three retrieval/vision losses compare a pseudo-target over the N
//! candidates with the LM's candidate-renormalized distribution. The language
//! loss compares the prompt-free distribution with the soft-prompted one over
//! the full vocabulary. Targets are frozen for the step; only the soft-prompted
//! distribution depends on the prompt.

use serde::{Deserialize, Serialize};

use crate::backends::{CausalLm, TokenId};
use crate::error::{Error, Result};
use crate::util::{log_sum_exp, softmax};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// `−Σ_k p_k log max(q_k, 1e-12)`.
pub fn loss_cross_entropy(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Internal(format!(
            "cross-entropy length mismatch: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    Ok(-p.iter().zip(q).map(|(pk, qk)| pk * qk.max(PROB_FLOOR).ln()).sum::<f64>())
}

/// Fluency loss: target is the prompt-free ("reading") distribution, prediction
/// the soft-prompted ("writing") one, over the full vocabulary.
pub fn loss_language(q_soft: &[f64], q_plain: &[f64]) -> Result<f64> {
    loss_cross_entropy(q_plain, q_soft)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub language: f64,
    pub sentences: f64,
    pub words: f64,
    pub vision: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            language: 1.6,
            sentences: 0.8,
            words: 0.3,
            vision: 1.0,
        }
    }
}

impl LossWeights {
    pub const ZERO: Self = Self {
        language: 0.0,
        sentences: 0.0,
        words: 0.0,
        vision: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, w) in self.named() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config(format!("loss weight {name} must be ≥ 0, got {w}")));
            }
        }
        Ok(())
    }

    pub fn named(&self) -> [(&'static str, f64); 4] {
        [
            ("language", self.language),
            ("sentences", self.sentences),
            ("words", self.words),
            ("vision", self.vision),
        ]
    }

    /// True when at least one loss contributes.
    pub fn any_active(&self) -> bool {
        self.named().iter().any(|(_, w)| *w > 0.0)
    }
}

/// Per-step loss values. Inactive losses are recorded as 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub language: f64,
    pub sentences: f64,
    pub words: f64,
    pub vision: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.language, self.sentences, self.words, self.vision, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// `λ_l·ℓ_language + λ_s·ℓ_S + λ_w·ℓ_W + λ_v·ℓ_vision`.
pub fn total_loss(language: f64, sentences: f64, words: f64, vision: f64, w: &LossWeights) -> f64 {
    w.language * language + w.sentences * sentences + w.words * words + w.vision * vision
}

/// Everything a step's loss needs besides the soft prompt itself.
///
/// A target left as `None` disables its loss regardless of the weight.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepTargets {
    pub candidates: Vec<TokenId>,
    pub sentences: Option<Vec<f64>>,
    pub words: Option<Vec<f64>>,
    pub vision: Option<Vec<f64>>,
    /// Full-vocabulary prompt-free distribution.
    pub plain: Option<Vec<f64>>,
}

/// The step objective as a function of the soft prompt.
pub struct SoftObjective<'a> {
    pub lm: &'a dyn CausalLm,
    /// Tokens after the soft prompt: textual prefix, hard prompt, generated text.
    pub tokens: &'a [TokenId],
    pub targets: &'a StepTargets,
    pub weights: LossWeights,
}

impl SoftObjective<'_> {
    fn check(&self) -> Result<()> {
        let n = self.targets.candidates.len();
        for t in [&self.targets.sentences, &self.targets.words, &self.targets.vision]
            .into_iter()
            .flatten()
        {
            if t.len() != n {
                return Err(Error::Internal("pseudo-target length differs from candidate count".into()));
            }
        }
        if let Some(plain) = &self.targets.plain {
            if plain.len() != self.lm.vocab_size() {
                return Err(Error::Internal("plain distribution has the wrong vocabulary size".into()));
            }
        }
        Ok(())
    }

    fn breakdown(&self, logits: &[f64]) -> Result<(LossBreakdown, Vec<f64>, Vec<f64>)> {
        self.check()?;
        let full = softmax(logits);
        let cand_logits: Vec<f64> = self
            .targets
            .candidates
            .iter()
            .map(|&i| logits[i as usize])
            .collect();
        let lse = log_sum_exp(&cand_logits);
        let cand: Vec<f64> = cand_logits.iter().map(|z| (z - lse).exp()).collect();

        let mut b = LossBreakdown::default();
        let w = &self.weights;
        if w.sentences > 0.0 {
            if let Some(p) = &self.targets.sentences {
                b.sentences = loss_cross_entropy(p, &cand)?;
            }
        }
        if w.words > 0.0 {
            if let Some(p) = &self.targets.words {
                b.words = loss_cross_entropy(p, &cand)?;
            }
        }
        if w.vision > 0.0 {
            if let Some(p) = &self.targets.vision {
                b.vision = loss_cross_entropy(p, &cand)?;
            }
        }
        if w.language > 0.0 {
            if let Some(q) = &self.targets.plain {
                b.language = loss_language(&full, q)?;
            }
        }
        b.total = total_loss(b.language, b.sentences, b.words, b.vision, w);
        Ok((b, full, cand))
    }

    pub fn evaluate(&self, soft: &[Vec<f64>]) -> Result<LossBreakdown> {
        let logits = self.lm.logits(soft, self.tokens)?;
        Ok(self.breakdown(&logits)?.0)
    }

    /// Loss and its gradient with respect to every soft-prompt coordinate.
    pub fn gradient(&self, soft: &[Vec<f64>]) -> Result<(LossBreakdown, Vec<Vec<f64>>)> {
        let logits = self.lm.logits(soft, self.tokens)?;
        let (b, full, cand) = self.breakdown(&logits)?;
        let w = &self.weights;
        let mut g = vec![0.0; logits.len()];

        // d/dz_j of −Σ_k p_k log softmax(z)_k is q_j·Σ'p − p_j, where Σ' skips
        // the floored entries (their term is constant).
        let retrieval = [
            (w.sentences, &self.targets.sentences),
            (w.words, &self.targets.words),
            (w.vision, &self.targets.vision),
        ];
        for (lambda, target) in retrieval {
            let Some(p) = target else { continue };
            if lambda == 0.0 {
                continue;
            }
            let mass = unfloored_mass(p, &cand);
            for (k, &id) in self.targets.candidates.iter().enumerate() {
                let own = if cand[k] >= PROB_FLOOR { p[k] } else { 0.0 };
                g[id as usize] += lambda * (cand[k] * mass - own);
            }
        }
        if w.language > 0.0 {
            if let Some(q) = &self.targets.plain {
                let mass = unfloored_mass(q, &full);
                for v in 0..g.len() {
                    let own = if full[v] >= PROB_FLOOR { q[v] } else { 0.0 };
                    g[v] += w.language * (full[v] * mass - own);
                }
            }
        }
        let grad = self.lm.prefix_vjp(soft, self.tokens, &g)?;
        Ok((b, grad))
    }
}

fn unfloored_mass(target: &[f64], pred: &[f64]) -> f64 {
    target
        .iter()
        .zip(pred)
        .filter(|(_, q)| **q >= PROB_FLOOR)
        .map(|(p, _)| p)
        .sum()
}
