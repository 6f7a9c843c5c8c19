//! Orchestration around the `retcap` engine: run configuration, dataset
//! manifests, captioning runs, evaluation and ablation sweeps.
//!
//! Every artifact carries the fingerprint of the configuration that produced
//! it. Toy-backend runs with equal fingerprints are byte-identical.

pub mod ablation;
pub mod config;
mod error;
pub mod evaluate;
pub mod manifest;
pub mod run;
pub mod toy_data;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use manifest::{DatasetManifest, ManifestEntry};
