use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::optim::AdamState;
use crate::backends::{CausalLm, TokenId};
use crate::error::{input_err, Error, Result};

pub const DEFAULT_PROMPTS: [&str; 4] = ["Video showing", "Video describes", "Video of", "Video shows"];
pub const DEFAULT_SOFT_TOKENS: usize = 5;
pub const DEFAULT_INIT_NOISE: f64 = 0.02;

/// A fixed text prompt drawn from the configured set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardPrompt {
    pub text: String,
    pub tokens: Vec<TokenId>,
}

#[derive(Clone, Debug)]
pub struct PromptSet {
    prompts: Vec<String>,
}

impl PromptSet {
    pub fn new(prompts: Vec<String>) -> Result<Self> {
        if prompts.is_empty() {
            return input_err("prompt set is empty");
        }
        if let Some(p) = prompts.iter().find(|p| p.trim().is_empty()) {
            return input_err(format!("prompt set contains an empty prompt {p:?}"));
        }
        Ok(Self { prompts })
    }

    pub fn len(&self) -> usize {
        self.prompts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompts.is_empty()
    }

    pub fn get(&self, i: usize, lm: &dyn CausalLm) -> Result<HardPrompt> {
        let text = self
            .prompts
            .get(i)
            .ok_or_else(|| Error::Input(format!("prompt index {i} out of range")))?;
        let tokens = lm.encode(text);
        if tokens.is_empty() {
            return input_err(format!("prompt {text:?} encodes to no tokens"));
        }
        Ok(HardPrompt {
            text: text.clone(),
            tokens,
        })
    }

    pub fn sample(&self, rng: &mut impl Rng, lm: &dyn CausalLm) -> Result<HardPrompt> {
        self.get(rng.random_range(0..self.prompts.len()), lm)
    }
}

/// The learnable prefix: `P` vectors of LM embedding width plus optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftPrompt {
    pub embeddings: Vec<Vec<f64>>,
    pub state: AdamState,
}

impl SoftPrompt {
    pub fn new(embeddings: Vec<Vec<f64>>) -> Result<Self> {
        if embeddings.is_empty() {
            return input_err("soft prompt needs at least one vector");
        }
        let d = embeddings[0].len();
        if embeddings.iter().any(|e| e.len() != d) {
            return Err(Error::Config("soft prompt vectors have unequal widths".into()));
        }
        let state = AdamState::zeros(embeddings.len(), d);
        Ok(Self { embeddings, state })
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.embeddings.iter().flatten().all(|v| v.is_finite())
    }
}

/// `p` copies of the hard prompt's mean token embedding plus `N(0, σ²)` noise.
pub fn init_soft_prompt(
    hard: &HardPrompt,
    p: usize,
    seed: u64,
    lm: &dyn CausalLm,
    sigma: f64,
) -> Result<SoftPrompt> {
    if p == 0 {
        return input_err("soft prompt length P must be at least 1");
    }
    if hard.tokens.is_empty() {
        return input_err("hard prompt has no tokens");
    }
    let d = lm.embed_dim();
    let mut mean = vec![0.0; d];
    for &t in &hard.tokens {
        for (m, e) in mean.iter_mut().zip(lm.token_embedding(t)?) {
            *m += e;
        }
    }
    let n = hard.tokens.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);

    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Input(format!("noise scale: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let embeddings = (0..p)
        .map(|_| mean.iter().map(|m| m + noise.sample(&mut rng)).collect())
        .collect();
    SoftPrompt::new(embeddings)
}
