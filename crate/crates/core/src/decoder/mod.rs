//! Soft-prompt decoding.
//!
//! Each token step builds the top-N candidate set, derives pseudo-targets from
//! retrieved sentences, high-frequency words and keyframes, takes one AdamW
//! step on the weighted cross-entropy total and then emits from the updated
//! distribution. The backbone never changes; only the soft prompt does.

mod generate;
mod loss;
mod optim;
mod prompt;
mod targets;

pub use generate::{
    generate_caption, select_best_caption, CaptionResult, CaptionSession, DecodeConfig, Emission,
    GenerationState, SentenceOutput, StepOutput, DEFAULT_ITERATIONS, DEFAULT_MAX_TOKENS,
};
pub use loss::{
    loss_cross_entropy, loss_language, total_loss, LossBreakdown, LossWeights, SoftObjective,
    StepTargets, PROB_FLOOR,
};
pub use optim::{adamw_update, optimize_step, AdamState, AdamWConfig, StepOutcome};
pub use prompt::{
    init_soft_prompt, HardPrompt, PromptSet, SoftPrompt, DEFAULT_INIT_NOISE, DEFAULT_PROMPTS,
    DEFAULT_SOFT_TOKENS,
};
pub use targets::{
    candidate_set, pseudo_target_sentences, pseudo_target_vision, pseudo_target_words, CandidateSet,
    DEFAULT_CANDIDATES, DEFAULT_TEMPERATURE,
};
