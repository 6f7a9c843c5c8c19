//! Retrieval-enhanced zero-shot video captioning.
//!
//! A frozen causal language model is steered at inference time by a handful of
//! learnable soft-prompt embeddings. At every decoding step the prompt takes one
//! gradient step on a weighted sum of cross-entropies whose targets come from
//! retrieved sentences, high-frequency retrieved words, keyframe-text matching
//! and the model's own prompt-free distribution.
//!
//! The neural scorers are abstract ([`backends`]); deterministic toy models are
//! bundled so the whole method runs and is testable without checkpoints.
//!
//! Module map:
//! - [`backends`]: scorer traits, embeddings, toy and file-backed implementations
//! - [`retrieval`]: corpus index, top-K retrieval, high-frequency word sampling
//! - [`keyframes`]: fixed-rate frame sampling and anchor-threshold deduplication
//! - [`decoder`]: soft-prompt decoding loop, pseudo-targets, losses, AdamW
//! - [`metrics`]: BLEU@4, ROUGE-L and CIDEr-D

pub mod backends;
pub mod decoder;
mod error;
pub mod keyframes;
pub mod metrics;
pub mod retrieval;
pub mod util;

pub use backends::{BackendSuite, EmbeddingVector, Frame, TokenDistribution, TokenId};
pub use error::{Error, Result};
