//! Candidate next tokens and the pseudo-target distributions over them.
//!
//! Each pseudo-target scores the N candidate continuations `s_k` against an
//! external signal, averages over that signal's items and turns the averages
//! into a distribution with a temperature softmax.

use crate::backends::{CausalLm, ImageTextScorer, SentenceScorer, TokenDistribution, TokenId};
use crate::error::{input_err, Result};
use crate::keyframes::KeyframeSet;
use crate::util::softmax_with_temperature;

pub const DEFAULT_CANDIDATES: usize = 100;
pub const DEFAULT_TEMPERATURE: f64 = 0.1;

/// Top-N next-token candidates with renormalized base probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub ids: Vec<TokenId>,
    /// `q`: the full-vocabulary probabilities of `ids`, renormalized to sum to 1.
    pub base_probs: Vec<f64>,
    /// `s_k`: the generated text so far followed by candidate `k` (no prompts).
    pub texts: Vec<String>,
}

impl CandidateSet {
    /// Take the top `n` tokens of `dist` (clamped to the vocabulary size).
    pub fn from_distribution(
        dist: &TokenDistribution,
        generated: &[TokenId],
        n: usize,
        lm: &dyn CausalLm,
    ) -> Result<Self> {
        if n == 0 {
            return input_err("candidate count N must be at least 1");
        }
        let ids = dist.top_n(n);
        let mass: f64 = ids.iter().map(|&i| dist.prob(i)).sum();
        let base_probs = ids.iter().map(|&i| dist.prob(i) / mass).collect();
        let mut seq = generated.to_vec();
        let texts = ids
            .iter()
            .map(|&id| {
                seq.push(id);
                let t = lm.decode(&seq);
                seq.pop();
                t
            })
            .collect();
        Ok(Self {
            ids,
            base_probs,
            texts,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, id: TokenId) -> Option<usize> {
        self.ids.iter().position(|&i| i == id)
    }
}

/// Candidates for `soft ⧺ embed(scaffold ⧺ generated)`.
///
/// `scaffold` is every token between the soft prompt and the generated text
/// (the hard prompt, preceded by any textual prefix).
pub fn candidate_set(
    lm: &dyn CausalLm,
    soft: &[Vec<f64>],
    scaffold: &[TokenId],
    generated: &[TokenId],
    n: usize,
) -> Result<CandidateSet> {
    let mut tokens = scaffold.to_vec();
    tokens.extend_from_slice(generated);
    let dist = crate::backends::lm_next_distribution(lm, soft, &tokens)?;
    CandidateSet::from_distribution(&dist, generated, n, lm)
}

fn check_temperature(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau > 0.0) {
        return input_err(format!("temperature must be positive, got {tau}"));
    }
    Ok(())
}

/// Column means of a `rows × N` score matrix.
fn column_means(m: &[Vec<f64>], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for row in m {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    let r = m.len() as f64;
    out.iter_mut().for_each(|o| *o /= r);
    out
}

fn text_pseudo_target(
    cands: &CandidateSet,
    references: &[String],
    scorer: &dyn SentenceScorer,
    tau: f64,
    what: &str,
) -> Result<Vec<f64>> {
    if references.is_empty() {
        return input_err(format!("no {what} to build a pseudo-target from"));
    }
    check_temperature(tau)?;
    let m = scorer.similarity_matrix(references, &cands.texts)?;
    Ok(softmax_with_temperature(&column_means(&m, cands.len()), tau))
}

/// `p_S = softmax((1/K) Σ_R sim(R, s_k) / τ)` over the candidates.
pub fn pseudo_target_sentences(
    cands: &CandidateSet,
    sentences: &[String],
    scorer: &dyn SentenceScorer,
    tau: f64,
) -> Result<Vec<f64>> {
    text_pseudo_target(cands, sentences, scorer, tau, "retrieved sentences")
}

/// `p_W = softmax((1/L) Σ_W sim(W, s_k) / τ)` over the candidates.
pub fn pseudo_target_words(
    cands: &CandidateSet,
    words: &[String],
    scorer: &dyn SentenceScorer,
    tau: f64,
) -> Result<Vec<f64>> {
    text_pseudo_target(cands, words, scorer, tau, "high-frequency words")
}

/// `p_V = softmax((1/T) Σ_F sim(F, s_k) / τ)` over the candidates.
pub fn pseudo_target_vision(
    cands: &CandidateSet,
    keys: &KeyframeSet,
    scorer: &dyn ImageTextScorer,
    tau: f64,
) -> Result<Vec<f64>> {
    if keys.embeddings.is_empty() {
        return input_err("keyframe set is empty");
    }
    check_temperature(tau)?;
    let m = scorer.score_matrix(&keys.embeddings, &cands.texts)?;
    Ok(softmax_with_temperature(&column_means(&m, cands.len()), tau))
}
