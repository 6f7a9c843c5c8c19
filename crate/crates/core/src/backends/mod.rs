//! Scorer interfaces shared by every stage of the pipeline.
//!
//! Four roles are abstracted:
//!
//! | Role | Trait | Used for |
//! |------|-------|----------|
//! | video-text dual encoder | [`VideoEncoder`] | corpus retrieval |
//! | image-text matcher | [`ImageTextScorer`] | keyframes, vision loss, best-of-M |
//! | causal language model | [`CausalLm`] | decoding and the soft-prompt gradient |
//! | sentence similarity | [`SentenceScorer`] | retrieval pseudo-targets |
//!
//! All scorers are pure functions of their inputs and are shared read-only
//! across threads. [`toy`] supplies seeded deterministic implementations;
//! [`files`] reads precomputed visual embeddings from disk.

use std::sync::Arc;

use fnv::FnvHasher;
use serde::{Deserialize, Serialize};
use std::hash::Hasher;

use crate::error::{input_err, Error, Result};
use crate::util::{dot, l2_norm, softmax};

pub mod blob;
pub mod files;
pub mod toy;

pub type TokenId = u32;

/// Default number of frames uniformly sampled for video-level encoding.
pub const DEFAULT_RETRIEVAL_FRAMES: usize = 16;

/// Unit-norm vector in a backend's shared semantic space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Arc<[f64]>);

impl EmbeddingVector {
    /// L2-normalizes `values`. Zero or non-finite input is rejected.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return input_err("embedding has zero dimension");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return input_err("embedding contains non-finite values");
        }
        let norm = l2_norm(&values);
        if norm == 0.0 {
            return input_err("cannot normalize a zero vector");
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        dot(&self.0, &other.0)
    }

    /// Normalized mean of several embeddings.
    pub fn mean(items: &[EmbeddingVector]) -> Result<Self> {
        let Some(first) = items.first() else {
            return input_err("mean of an empty embedding list");
        };
        let mut acc = vec![0.0; first.dim()];
        for e in items {
            if e.dim() != acc.len() {
                return Err(Error::Config(format!(
                    "embedding dimension mismatch: {} vs {}",
                    e.dim(),
                    acc.len()
                )));
            }
            for (a, v) in acc.iter_mut().zip(e.as_slice()) {
                *a += v;
            }
        }
        Self::normalized(acc)
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::normalized(v)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(e: EmbeddingVector) -> Self {
        e.0.to_vec()
    }
}

/// Clamp a similarity to the interface range [-1, 1].
pub fn clamp_similarity(s: f64) -> f64 {
    s.clamp(-1.0, 1.0)
}

/// Next-token probabilities over the full vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenDistribution {
    probs: Vec<f64>,
}

impl TokenDistribution {
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if logits.is_empty() {
            return input_err("empty logits");
        }
        if logits.iter().any(|l| l.is_nan()) {
            return Err(Error::Backend("language model produced NaN logits".into()));
        }
        Ok(Self {
            probs: softmax(logits),
        })
    }

    /// Validates non-negativity and unit mass (within 1e-6).
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return input_err("empty distribution");
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return input_err("distribution entries must be finite and non-negative");
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return input_err(format!("distribution sums to {total}, expected 1"));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn vocab_size(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, id: TokenId) -> f64 {
        self.probs[id as usize]
    }

    /// Highest-probability token; ties go to the smaller id.
    pub fn argmax(&self) -> TokenId {
        self.top_n(1)[0]
    }

    /// The `n` most probable token ids in descending order (ties by id).
    pub fn top_n(&self, n: usize) -> Vec<TokenId> {
        let mut ids = crate::util::argsort_desc(&self.probs);
        ids.truncate(n.min(self.probs.len()));
        ids.into_iter().map(|i| i as TokenId).collect()
    }
}

/// A single video frame as handed to the visual towers.
#[derive(Clone, Debug, PartialEq)]
pub enum Frame {
    /// Precomputed visual features in the scorer's embedding space.
    Features(Arc<[f64]>),
    /// Decoded RGB pixels.
    Pixels(Arc<image::RgbImage>),
}

impl Frame {
    pub fn from_features(values: Vec<f64>) -> Self {
        Frame::Features(values.into())
    }
}

/// Video-text dual encoder (the retrieval side).
pub trait VideoEncoder: Send + Sync {
    fn dim(&self) -> usize;
    /// Encode an already-subsampled frame list into one video embedding.
    fn encode_frames(&self, frames: &[Frame]) -> Result<EmbeddingVector>;
    /// Text tower used to embed corpus sentences.
    fn encode_text(&self, text: &str) -> Result<EmbeddingVector>;
    fn parameter_checksum(&self) -> u64;
}

/// Image-text matcher used for keyframe dedup, the vision loss and caption selection.
pub trait ImageTextScorer: Send + Sync {
    fn dim(&self) -> usize;
    fn embed_image(&self, frame: &Frame) -> Result<EmbeddingVector>;
    fn embed_text(&self, text: &str) -> Result<EmbeddingVector>;
    fn parameter_checksum(&self) -> u64;

    /// Similarity between an embedded image and a text, in [-1, 1].
    fn score(&self, image: &EmbeddingVector, text: &str) -> Result<f64> {
        let t = self.embed_text(text)?;
        Ok(clamp_similarity(image.dot(&t)))
    }

    /// `out[i][j] = score(images[i], texts[j])`, embedding each text once.
    fn score_matrix(&self, images: &[EmbeddingVector], texts: &[String]) -> Result<Vec<Vec<f64>>> {
        let embedded = texts
            .iter()
            .map(|t| self.embed_text(t))
            .collect::<Result<Vec<_>>>()?;
        Ok(images
            .iter()
            .map(|img| embedded.iter().map(|t| clamp_similarity(img.dot(t))).collect())
            .collect())
    }
}

/// Text-text semantic similarity.
pub trait SentenceScorer: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
    fn parameter_checksum(&self) -> u64;

    fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        let (ea, eb) = (self.embed(a)?, self.embed(b)?);
        Ok(clamp_similarity(ea.dot(&eb)))
    }

    /// `out[i][j] = similarity(rows[i], cols[j])`, embedding each text once.
    fn similarity_matrix(&self, rows: &[String], cols: &[String]) -> Result<Vec<Vec<f64>>> {
        let embed_all = |ts: &[String]| ts.iter().map(|t| self.embed(t)).collect::<Result<Vec<_>>>();
        let (r, c) = (embed_all(rows)?, embed_all(cols)?);
        Ok(r.iter()
            .map(|a| c.iter().map(|b| clamp_similarity(a.dot(b))).collect())
            .collect())
    }
}

/// Frozen causal language model that accepts continuous prefix embeddings.
///
/// The input sequence is `prefix ⧺ embed(tokens)`; the output is the logit
/// vector for the next token. [`CausalLm::prefix_vjp`] supplies the
/// vector-Jacobian product of those logits with respect to the prefix, which is
/// all the soft-prompt optimizer needs.
pub trait CausalLm: Send + Sync {
    fn vocab_size(&self) -> usize;
    fn embed_dim(&self) -> usize;
    fn encode(&self, text: &str) -> Vec<TokenId>;
    fn decode(&self, ids: &[TokenId]) -> String;
    fn token_embedding(&self, id: TokenId) -> Result<&[f64]>;
    fn logits(&self, prefix: &[Vec<f64>], tokens: &[TokenId]) -> Result<Vec<f64>>;
    /// Gradient of `Σ_v grad_logits[v] · logits[v]` with respect to every prefix vector.
    fn prefix_vjp(
        &self,
        prefix: &[Vec<f64>],
        tokens: &[TokenId],
        grad_logits: &[f64],
    ) -> Result<Vec<Vec<f64>>>;
    fn parameter_checksum(&self) -> u64;
}

/// Uniformly subsample `n_sample` frames (indices `⌊i·len/n_sample⌋`) and encode them.
pub fn encode_video(
    encoder: &dyn VideoEncoder,
    frames: &[Frame],
    n_sample: usize,
) -> Result<EmbeddingVector> {
    if frames.is_empty() {
        return input_err("cannot encode a video with no frames");
    }
    if n_sample == 0 {
        return input_err("n_sample must be at least 1");
    }
    let picked: Vec<Frame> = uniform_indices(frames.len(), n_sample)
        .into_iter()
        .map(|i| frames[i].clone())
        .collect();
    encoder.encode_frames(&picked)
}

/// `⌊i·len/n⌋` for `i in 0..n`.
pub fn uniform_indices(len: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| i * len / n).collect()
}

/// Full next-token distribution for `prefix ⧺ embed(tokens)`.
pub fn lm_next_distribution(
    lm: &dyn CausalLm,
    prefix: &[Vec<f64>],
    tokens: &[TokenId],
) -> Result<TokenDistribution> {
    TokenDistribution::from_logits(&lm.logits(prefix, tokens)?)
}

/// Text-text similarity with the interface preconditions enforced.
pub fn sentence_similarity(scorer: &dyn SentenceScorer, a: &str, b: &str) -> Result<f64> {
    if a.trim().is_empty() || b.trim().is_empty() {
        return input_err("sentence similarity requires non-empty texts");
    }
    scorer.similarity(a, b)
}

/// The four scorer roles bundled together.
#[derive(Clone)]
pub struct BackendSuite {
    pub video: Arc<dyn VideoEncoder>,
    pub image_text: Arc<dyn ImageTextScorer>,
    pub lm: Arc<dyn CausalLm>,
    pub sentence: Arc<dyn SentenceScorer>,
}

impl BackendSuite {
    /// Combined checksum of every backbone parameter.
    pub fn parameter_checksum(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write_u64(self.video.parameter_checksum());
        h.write_u64(self.image_text.parameter_checksum());
        h.write_u64(self.lm.parameter_checksum());
        h.write_u64(self.sentence.parameter_checksum());
        h.finish()
    }
}

impl std::fmt::Debug for BackendSuite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BackendSuite")
            .field("video_dim", &self.video.dim())
            .field("lm_vocab", &self.lm.vocab_size())
            .field("lm_dim", &self.lm.embed_dim())
            .finish()
    }
}
