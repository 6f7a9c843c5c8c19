//! Deterministic toy backends.
//!
//! Text is embedded as a normalized bag of seeded-hash Gaussian token vectors;
//! image frames are either feature vectors already in that space or pixels
//! projected through a seeded random matrix. All three visual/text roles share
//! one embedding space, so a synthetic frame built from the embedding of
//! "a cat is playing" scores highest against captions about cats.

use std::collections::HashMap;
use std::hash::Hasher;
use std::sync::Arc;

use fnv::FnvHasher;
use parking_lot::RwLock;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{
    BackendSuite, EmbeddingVector, Frame, ImageTextScorer, SentenceScorer, VideoEncoder,
};
use crate::error::{input_err, Error, Result};
use crate::util::{hash_f64s, stable_hash};

mod lm;
mod tokenizer;

pub use lm::{ToyLm, ToyLmConfig};
pub use tokenizer::{split_tokens, ToyTokenizer, UNK};

const CAPTIONS: &str = include_str!("data/captions.txt");

/// Caption-style sentences bundled with the toy backend (comments stripped).
pub fn bundled_captions() -> Vec<&'static str> {
    CAPTIONS
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}

/// Toy vocabulary: the bundled captions plus the default hard prompts.
pub fn bundled_tokenizer() -> ToyTokenizer {
    let prompts = crate::decoder::DEFAULT_PROMPTS.iter().copied();
    ToyTokenizer::from_texts(bundled_captions().into_iter().chain(prompts))
}

/// Seeded bag-of-tokens text embedder.
pub struct HashEmbedder {
    seed: u64,
    dim: usize,
    cache: RwLock<HashMap<String, Arc<[f64]>>>,
}

impl HashEmbedder {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self {
            seed,
            dim,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Standard-normal vector for a single token, a pure function of (seed, token).
    pub fn token_vector(&self, token: &str) -> Arc<[f64]> {
        if let Some(v) = self.cache.read().get(token) {
            return v.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(self.seed, token.as_bytes()));
        let v: Arc<[f64]> = (0..self.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        self.cache.write().insert(token.to_string(), v.clone());
        v
    }

    /// Tokens that contribute features: words, or punctuation when there are no words.
    pub fn feature_tokens(text: &str) -> Vec<String> {
        let toks = split_tokens(text);
        let words: Vec<String> = toks
            .iter()
            .filter(|t| t.chars().any(|c| c.is_alphanumeric()))
            .cloned()
            .collect();
        if words.is_empty() {
            toks
        } else {
            words
        }
    }

    pub fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let toks = Self::feature_tokens(text);
        if toks.is_empty() {
            return input_err(format!("cannot embed empty text {text:?}"));
        }
        let mut acc = vec![0.0; self.dim];
        for t in &toks {
            for (a, x) in acc.iter_mut().zip(self.token_vector(t).iter()) {
                *a += x;
            }
        }
        EmbeddingVector::normalized(acc)
    }

    fn checksum(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write_u64(self.seed);
        h.write_usize(self.dim);
        h.finish()
    }
}

const THUMB: u32 = 8;

/// Image tower: feature frames are normalized as-is, pixel frames are
/// downsampled to an 8×8 RGB thumbnail and projected by a seeded matrix.
pub struct ToyImageTower {
    dim: usize,
    projection: Vec<f64>,
}

impl ToyImageTower {
    pub fn new(seed: u64, dim: usize) -> Self {
        let n_in = (THUMB * THUMB * 3) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let projection = (0..dim * n_in)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        Self { dim, projection }
    }

    pub fn embed(&self, frame: &Frame) -> Result<EmbeddingVector> {
        match frame {
            Frame::Features(v) => {
                if v.len() != self.dim {
                    return Err(Error::Config(format!(
                        "frame features have width {}, image tower expects {}",
                        v.len(),
                        self.dim
                    )));
                }
                EmbeddingVector::normalized(v.to_vec())
            }
            Frame::Pixels(img) => {
                let thumb = image::imageops::resize(
                    img.as_ref(),
                    THUMB,
                    THUMB,
                    image::imageops::FilterType::Triangle,
                );
                let x: Vec<f64> = thumb
                    .as_raw()
                    .iter()
                    .map(|&b| f64::from(b) / 255.0 - 0.5)
                    .collect();
                let n_in = x.len();
                let mut out: Vec<f64> = (0..self.dim)
                    .map(|r| crate::util::dot(&self.projection[r * n_in..(r + 1) * n_in], &x))
                    .collect();
                // A flat mid-gray frame projects to zero; give it a fixed direction.
                if out.iter().all(|v| *v == 0.0) {
                    out[0] = 1.0;
                }
                EmbeddingVector::normalized(out)
            }
        }
    }

    fn checksum(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write_usize(self.dim);
        hash_f64s(&mut h, &self.projection);
        h.finish()
    }
}

/// Video encoder: mean of per-frame image embeddings, renormalized.
pub struct ToyVideoEncoder {
    text: Arc<HashEmbedder>,
    image: Arc<ToyImageTower>,
}

impl ToyVideoEncoder {
    pub fn new(text: Arc<HashEmbedder>, image: Arc<ToyImageTower>) -> Self {
        Self { text, image }
    }
}

impl VideoEncoder for ToyVideoEncoder {
    fn dim(&self) -> usize {
        self.text.dim()
    }

    fn encode_frames(&self, frames: &[Frame]) -> Result<EmbeddingVector> {
        let embs = frames
            .iter()
            .map(|f| self.image.embed(f))
            .collect::<Result<Vec<_>>>()?;
        EmbeddingVector::mean(&embs)
    }

    fn encode_text(&self, text: &str) -> Result<EmbeddingVector> {
        self.text.embed(text)
    }

    fn parameter_checksum(&self) -> u64 {
        self.text.checksum() ^ self.image.checksum().rotate_left(1)
    }
}

pub struct ToyImageTextScorer {
    text: Arc<HashEmbedder>,
    image: Arc<ToyImageTower>,
}

impl ToyImageTextScorer {
    pub fn new(text: Arc<HashEmbedder>, image: Arc<ToyImageTower>) -> Self {
        Self { text, image }
    }
}

impl ImageTextScorer for ToyImageTextScorer {
    fn dim(&self) -> usize {
        self.text.dim()
    }

    fn embed_image(&self, frame: &Frame) -> Result<EmbeddingVector> {
        self.image.embed(frame)
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        self.text.embed(text)
    }

    fn parameter_checksum(&self) -> u64 {
        self.text.checksum() ^ self.image.checksum().rotate_left(2)
    }
}

/// Sentence similarity as the cosine of two hash embeddings.
pub struct ToySentenceScorer {
    text: Arc<HashEmbedder>,
}

impl ToySentenceScorer {
    pub fn new(text: Arc<HashEmbedder>) -> Self {
        Self { text }
    }
}

impl SentenceScorer for ToySentenceScorer {
    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        self.text.embed(text)
    }

    fn parameter_checksum(&self) -> u64 {
        self.text.checksum().rotate_left(3)
    }
}

#[derive(Clone, Debug)]
pub struct ToyBackendConfig {
    pub seed: u64,
    /// Width of the shared text/image embedding space.
    pub dim: usize,
    pub lm: ToyLmConfig,
}

impl Default for ToyBackendConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dim: 64,
            lm: ToyLmConfig::default(),
        }
    }
}

/// Shared pieces of a toy suite, exposed so fixtures can synthesize frames in
/// the same space the scorers use.
pub struct ToyParts {
    pub text: Arc<HashEmbedder>,
    pub image: Arc<ToyImageTower>,
    pub lm: Arc<ToyLm>,
}

impl ToyParts {
    pub fn new(cfg: &ToyBackendConfig) -> Self {
        let text = Arc::new(HashEmbedder::new(cfg.seed, cfg.dim));
        let image = Arc::new(ToyImageTower::new(stable_hash(cfg.seed, b"image"), cfg.dim));
        let lm_cfg = ToyLmConfig {
            seed: stable_hash(cfg.seed ^ cfg.lm.seed, b"lm"),
            ..cfg.lm.clone()
        };
        let lm = Arc::new(ToyLm::new(bundled_tokenizer(), &lm_cfg, &bundled_captions()));
        Self { text, image, lm }
    }

    pub fn suite(&self) -> BackendSuite {
        BackendSuite {
            video: Arc::new(ToyVideoEncoder::new(self.text.clone(), self.image.clone())),
            image_text: Arc::new(ToyImageTextScorer::new(self.text.clone(), self.image.clone())),
            lm: self.lm.clone(),
            sentence: Arc::new(ToySentenceScorer::new(self.text.clone())),
        }
    }

    /// Synthetic frames: for each `(description, count)` scene, `count` frames whose
    /// features are the description's embedding plus seeded Gaussian noise.
    pub fn synth_frames(&self, scenes: &[(&str, usize)], noise: f64, seed: u64) -> Result<Vec<Frame>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = noise / (self.text.dim() as f64).sqrt();
        let normal = Normal::new(0.0, sd).map_err(|e| Error::Input(e.to_string()))?;
        let mut frames = Vec::new();
        for (desc, count) in scenes {
            let base = self.text.embed(desc)?;
            for _ in 0..*count {
                let v: Vec<f64> = base
                    .as_slice()
                    .iter()
                    .map(|x| x + normal.sample(&mut rng))
                    .collect();
                frames.push(Frame::from_features(v));
            }
        }
        Ok(frames)
    }
}

impl BackendSuite {
    pub fn toy(cfg: &ToyBackendConfig) -> Self {
        ToyParts::new(cfg).suite()
    }
}
