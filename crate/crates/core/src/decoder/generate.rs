//! The per-token optimize-then-emit loop and best-of-M caption selection.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{LossBreakdown, LossWeights, SoftObjective, StepTargets};
use super::optim::{optimize_step, AdamWConfig, StepOutcome};
use super::prompt::{
    init_soft_prompt, HardPrompt, PromptSet, SoftPrompt, DEFAULT_INIT_NOISE, DEFAULT_PROMPTS,
    DEFAULT_SOFT_TOKENS,
};
use super::targets::{
    candidate_set, pseudo_target_sentences, pseudo_target_vision, pseudo_target_words, CandidateSet,
    DEFAULT_CANDIDATES, DEFAULT_TEMPERATURE,
};
use crate::backends::{lm_next_distribution, BackendSuite, ImageTextScorer, TokenDistribution, TokenId};
use crate::error::{input_err, Error, Result};
use crate::keyframes::KeyframeSet;
use crate::retrieval::RetrievalContext;
use crate::util::stable_hash;

pub const DEFAULT_ITERATIONS: usize = 16;
pub const DEFAULT_MAX_TOKENS: usize = 15;

/// How the next token is picked from the updated distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Emission {
    #[default]
    Greedy,
    /// Seeded sampling among the `k` most probable tokens.
    TopK { k: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    /// P
    pub soft_tokens: usize,
    /// N
    pub candidates: usize,
    /// τ
    pub temperature: f64,
    /// M
    pub iterations: usize,
    pub max_tokens: usize,
    pub steps_per_token: usize,
    pub init_noise: f64,
    pub prompts: Vec<String>,
    pub weights: LossWeights,
    pub optimizer: AdamWConfig,
    pub emission: Emission,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            soft_tokens: DEFAULT_SOFT_TOKENS,
            candidates: DEFAULT_CANDIDATES,
            temperature: DEFAULT_TEMPERATURE,
            iterations: DEFAULT_ITERATIONS,
            max_tokens: DEFAULT_MAX_TOKENS,
            steps_per_token: 1,
            init_noise: DEFAULT_INIT_NOISE,
            prompts: DEFAULT_PROMPTS.iter().map(|s| s.to_string()).collect(),
            weights: LossWeights::default(),
            optimizer: AdamWConfig::default(),
            emission: Emission::Greedy,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("soft_tokens", self.soft_tokens),
            ("candidates", self.candidates),
            ("iterations", self.iterations),
            ("max_tokens", self.max_tokens),
            ("steps_per_token", self.steps_per_token),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Config(format!("temperature must be positive, got {}", self.temperature)));
        }
        if !(self.init_noise.is_finite() && self.init_noise >= 0.0) {
            return Err(Error::Config(format!("init_noise must be ≥ 0, got {}", self.init_noise)));
        }
        if let Emission::TopK { k: 0 } = self.emission {
            return Err(Error::Config("top-k emission needs k ≥ 1".into()));
        }
        let o = &self.optimizer;
        if !(o.lr > 0.0 && o.weight_decay >= 0.0 && (0.0..1.0).contains(&o.beta1) && (0.0..1.0).contains(&o.beta2) && o.eps > 0.0) {
            return Err(Error::Config(format!("invalid optimizer settings {o:?}")));
        }
        self.weights.validate()?;
        PromptSet::new(self.prompts.clone()).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// Progress of one sentence.
#[derive(Clone, Debug)]
pub struct GenerationState {
    pub hard: HardPrompt,
    /// Textual prefix followed by the hard prompt.
    pub scaffold: Vec<TokenId>,
    pub generated: Vec<TokenId>,
    pub trace: Vec<LossBreakdown>,
    pub done: bool,
}

impl GenerationState {
    pub fn step_index(&self) -> usize {
        self.trace.len()
    }

    fn context(&self) -> Vec<TokenId> {
        let mut t = self.scaffold.clone();
        t.extend_from_slice(&self.generated);
        t
    }
}

/// What one token step produced.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub candidates: CandidateSet,
    pub losses: LossBreakdown,
    pub outcome: Option<StepOutcome>,
    /// Next-token distribution after the soft-prompt update.
    pub updated: TokenDistribution,
    pub token: TokenId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SentenceOutput {
    pub prompt: String,
    pub text: String,
    pub tokens: Vec<TokenId>,
    pub trace: Vec<LossBreakdown>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionResult {
    pub captions: Vec<String>,
    pub selection_scores: Vec<f64>,
    pub best_index: usize,
    pub best_caption: String,
    pub prompts: Vec<String>,
    pub traces: Vec<Vec<LossBreakdown>>,
}

/// One video's decoding session: owns the soft prompt, its optimizer state and the RNG.
#[derive(Clone)]
pub struct CaptionSession<'a> {
    backends: &'a BackendSuite,
    cfg: &'a DecodeConfig,
    keys: &'a KeyframeSet,
    sentences: Vec<String>,
    words: Vec<String>,
    weights: LossWeights,
    prompts: PromptSet,
    prefix: Vec<TokenId>,
    soft: Option<SoftPrompt>,
    seed: u64,
    rng: ChaCha8Rng,
}

impl<'a> CaptionSession<'a> {
    /// `text_prefix` is prepended verbatim before the hard prompt.
    ///
    /// Losses whose targets are unavailable (no retrieved sentences or words)
    /// are switched off for the session.
    pub fn new(
        backends: &'a BackendSuite,
        ctx: &RetrievalContext,
        keys: &'a KeyframeSet,
        cfg: &'a DecodeConfig,
        seed: u64,
        text_prefix: Option<&str>,
    ) -> Result<Self> {
        cfg.validate()?;
        if keys.is_empty() {
            return input_err("keyframe set is empty");
        }
        let prefix = match text_prefix {
            Some(t) => backends.lm.encode(t),
            None => Vec::new(),
        };
        let mut session = Self {
            backends,
            cfg,
            keys,
            sentences: ctx.sentence_texts(),
            words: ctx.word_texts(),
            weights: cfg.weights,
            prompts: PromptSet::new(cfg.prompts.clone())?,
            prefix,
            soft: None,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        session.set_weights(cfg.weights)?;
        Ok(session)
    }

    pub fn weights(&self) -> LossWeights {
        self.weights
    }

    /// Replace the loss weights for the following steps.
    pub fn set_weights(&mut self, mut weights: LossWeights) -> Result<()> {
        weights.validate()?;
        if self.sentences.is_empty() && weights.sentences > 0.0 {
            log::warn!("no retrieved sentences; sentence loss disabled");
            weights.sentences = 0.0;
        }
        if self.words.is_empty() && weights.words > 0.0 {
            log::warn!("no high-frequency words; word loss disabled");
            weights.words = 0.0;
        }
        self.weights = weights;
        Ok(())
    }

    pub fn soft_prompt(&self) -> Option<&SoftPrompt> {
        self.soft.as_ref()
    }

    /// With every loss off nothing is optimized and no soft prompt is
    /// prepended, so decoding is the LM's plain continuation.
    fn uses_soft_prompt(&self) -> bool {
        self.weights.any_active()
    }

    fn soft_slice(&self) -> &[Vec<f64>] {
        match &self.soft {
            Some(s) if self.uses_soft_prompt() => &s.embeddings,
            _ => &[],
        }
    }

    pub fn sample_prompt(&mut self) -> Result<HardPrompt> {
        self.prompts.sample(&mut self.rng, self.backends.lm.as_ref())
    }

    /// Start a sentence. The first call also initializes the soft prompt from `hard`.
    pub fn begin(&mut self, hard: HardPrompt) -> Result<GenerationState> {
        if self.soft.is_none() {
            let seed = stable_hash(self.seed, b"soft-prompt");
            self.soft = Some(init_soft_prompt(
                &hard,
                self.cfg.soft_tokens,
                seed,
                self.backends.lm.as_ref(),
                self.cfg.init_noise,
            )?);
        }
        let mut scaffold = self.prefix.clone();
        scaffold.extend_from_slice(&hard.tokens);
        Ok(GenerationState {
            hard,
            scaffold,
            generated: Vec::new(),
            trace: Vec::new(),
            done: false,
        })
    }

    fn targets(&self, cands: &CandidateSet, context: &[TokenId]) -> Result<StepTargets> {
        let b = self.backends;
        let w = &self.weights;
        let tau = self.cfg.temperature;
        let mut t = StepTargets {
            candidates: cands.ids.clone(),
            ..Default::default()
        };
        if w.sentences > 0.0 {
            t.sentences = Some(pseudo_target_sentences(cands, &self.sentences, b.sentence.as_ref(), tau)?);
        }
        if w.words > 0.0 {
            t.words = Some(pseudo_target_words(cands, &self.words, b.sentence.as_ref(), tau)?);
        }
        if w.vision > 0.0 {
            t.vision = Some(pseudo_target_vision(cands, self.keys, b.image_text.as_ref(), tau)?);
        }
        if w.language > 0.0 {
            let plain = lm_next_distribution(b.lm.as_ref(), &[], context)?;
            t.plain = Some(plain.probs().to_vec());
        }
        if cfg!(debug_assertions) {
            let dists = [Some(&cands.base_probs), t.sentences.as_ref(), t.words.as_ref(), t.vision.as_ref()];
            for d in dists.into_iter().flatten() {
                debug_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-6, "candidate distribution off unit mass");
            }
        }
        Ok(t)
    }

    /// One token step: candidates, pseudo-targets, losses, update, emission.
    pub fn step(&mut self, state: &mut GenerationState) -> Result<StepOutput> {
        if state.done {
            return Err(Error::Internal("sentence already finished".into()));
        }
        let lm = self.backends.lm.as_ref();
        let context = state.context();
        let cands = candidate_set(lm, self.soft_slice(), &state.scaffold, &state.generated, self.cfg.candidates)?;

        let mut outcome = None;
        let losses = if self.uses_soft_prompt() {
            let targets = self.targets(&cands, &context)?;
            let mut first = None;
            for _ in 0..self.cfg.steps_per_token {
                let soft = self.soft.as_mut().expect("soft prompt initialized in begin");
                let objective = SoftObjective {
                    lm,
                    tokens: &context,
                    targets: &targets,
                    weights: self.weights,
                };
                let (b, grad) = objective.gradient(&soft.embeddings)?;
                first.get_or_insert(b);
                outcome = Some(optimize_step(soft, &grad, &self.cfg.optimizer)?);
            }
            first.unwrap_or_default()
        } else {
            LossBreakdown::default()
        };
        if !losses.is_finite() {
            return Err(Error::Backend(format!("non-finite loss at step {}", state.step_index())));
        }

        let updated = lm_next_distribution(lm, self.soft_slice(), &context)?;
        let token = match self.cfg.emission {
            Emission::Greedy => updated.argmax(),
            Emission::TopK { k } => sample_top_k(&updated, k, &mut self.rng),
        };
        state.generated.push(token);
        state.trace.push(losses);
        if lm.decode(&[token]).ends_with('.') || state.generated.len() >= self.cfg.max_tokens {
            state.done = true;
        }
        Ok(StepOutput {
            candidates: cands,
            losses,
            outcome,
            updated,
            token,
        })
    }

    pub fn generate_sentence(&mut self, hard: HardPrompt) -> Result<SentenceOutput> {
        let mut state = self.begin(hard)?;
        while !state.done {
            self.step(&mut state)?;
        }
        Ok(SentenceOutput {
            prompt: state.hard.text,
            text: self.backends.lm.decode(&state.generated),
            tokens: state.generated,
            trace: state.trace,
        })
    }

    /// M sentences with a freshly sampled hard prompt each; the soft prompt carries over.
    pub fn generate_caption(&mut self) -> Result<CaptionResult> {
        let mut sentences = Vec::with_capacity(self.cfg.iterations);
        for _ in 0..self.cfg.iterations {
            let hard = self.sample_prompt()?;
            sentences.push(self.generate_sentence(hard)?);
        }
        let captions: Vec<String> = sentences.iter().map(|s| s.text.clone()).collect();
        let (best_index, selection_scores) =
            select_best_caption(&captions, self.keys, self.backends.image_text.as_ref())?;
        Ok(CaptionResult {
            best_caption: captions[best_index].clone(),
            captions,
            selection_scores,
            best_index,
            prompts: sentences.iter().map(|s| s.prompt.clone()).collect(),
            traces: sentences.into_iter().map(|s| s.trace).collect(),
        })
    }
}

fn sample_top_k(dist: &TokenDistribution, k: usize, rng: &mut impl Rng) -> TokenId {
    let ids = dist.top_n(k);
    let mass: f64 = ids.iter().map(|&i| dist.prob(i)).sum();
    let mut u = rng.random::<f64>() * mass;
    for &id in &ids {
        u -= dist.prob(id);
        if u <= 0.0 {
            return id;
        }
    }
    *ids.last().expect("top_n returns at least one id")
}

/// Run a full caption generation for one video.
pub fn generate_caption(
    backends: &BackendSuite,
    ctx: &RetrievalContext,
    keys: &KeyframeSet,
    cfg: &DecodeConfig,
    seed: u64,
    text_prefix: Option<&str>,
) -> Result<CaptionResult> {
    CaptionSession::new(backends, ctx, keys, cfg, seed, text_prefix)?.generate_caption()
}

/// Mean keyframe-caption score per caption; the best is the first maximum.
pub fn select_best_caption(
    captions: &[String],
    keys: &KeyframeSet,
    scorer: &dyn ImageTextScorer,
) -> Result<(usize, Vec<f64>)> {
    if captions.is_empty() {
        return input_err("no captions to select from");
    }
    if keys.is_empty() {
        return input_err("keyframe set is empty");
    }
    let m = scorer.score_matrix(&keys.embeddings, captions)?;
    let t = m.len() as f64;
    let scores: Vec<f64> = (0..captions.len())
        .map(|c| m.iter().map(|row| row[c]).sum::<f64>() / t)
        .collect();
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    Ok((best, scores))
}
