//! Run configuration: every hyperparameter of a captioning run in one TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use retcap::backends::toy::{ToyBackendConfig, ToyLmConfig};
use retcap::backends::DEFAULT_RETRIEVAL_FRAMES;
use retcap::decoder::DecodeConfig;
use retcap::keyframes::{Reanchor, DEFAULT_CLIP_THRESHOLD, DEFAULT_FPS};

use crate::error::{Error, Result};

/// Corpus ids that need no path.
pub const BUNDLED_CORPUS: &str = "bundled";
pub const TESTSET_CORPUS: &str = "testset";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Toy scorers for everything; frames may be images or feature blobs.
    #[default]
    Toy,
    /// Precomputed frame features stand in for the visual towers.
    Files,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Seed of the toy weights.
    pub seed: u64,
    /// Width of the toy text/image space.
    pub dim: usize,
    /// Width of the toy LM.
    pub lm_dim: usize,
    pub lm_embedding_scale: f64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        let toy = ToyBackendConfig::default();
        Self {
            kind: BackendKind::Toy,
            seed: toy.seed,
            dim: toy.dim,
            lm_dim: toy.lm.dim,
            lm_embedding_scale: toy.lm.embedding_scale,
        }
    }
}

impl BackendConfig {
    pub fn toy(&self) -> ToyBackendConfig {
        ToyBackendConfig {
            seed: self.seed,
            dim: self.dim,
            lm: ToyLmConfig {
                dim: self.lm_dim,
                embedding_scale: self.lm_embedding_scale,
                ..Default::default()
            },
        }
    }
}

/// Where retrieval sentences come from.
///
/// With no `path`, `id` must be `"bundled"` (captions shipped with the toy LM)
/// or `"testset"` (every reference caption in the manifest). A `path` names a
/// corpus file or a saved index directory; `id` then only labels it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            id: TESTSET_CORPUS.into(),
            path: None,
        }
    }
}

impl CorpusConfig {
    /// Parses `bundled`, `testset` or a path (the id becomes the file stem).
    pub fn parse(arg: &str) -> Self {
        match arg {
            BUNDLED_CORPUS | TESTSET_CORPUS => Self {
                id: arg.into(),
                path: None,
            },
            p => {
                let path = PathBuf::from(p);
                let id = path
                    .file_stem()
                    .map_or_else(|| p.to_string(), |s| s.to_string_lossy().into_owned());
                Self { id, path: Some(path) }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    /// K
    pub k: usize,
    /// L
    pub l: usize,
    /// Frames uniformly sampled for the video-level embedding.
    pub video_frames: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: 15,
            l: 5,
            video_frames: DEFAULT_RETRIEVAL_FRAMES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeyframeConfig {
    pub fps: f64,
    /// Frame rate assumed for manifest entries that do not state one.
    pub native_fps: f64,
    /// λ_CLIP
    pub clip_threshold: f64,
    pub reanchor: Reanchor,
}

impl Default for KeyframeConfig {
    fn default() -> Self {
        Self {
            fps: DEFAULT_FPS,
            native_fps: 30.0,
            clip_threshold: DEFAULT_CLIP_THRESHOLD,
            reanchor: Reanchor::Admitted,
        }
    }
}

/// How retrieved sentences reach the decoder.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    /// Through the sentence and word losses.
    #[default]
    Loss,
    /// Concatenated as a textual prefix, with both retrieval losses off.
    Prefix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
    pub mode: RetrievalMode,
    pub backend: BackendConfig,
    pub corpus: CorpusConfig,
    pub retrieval: RetrievalConfig,
    pub keyframes: KeyframeConfig,
    pub decode: DecodeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 1,
            out_dir: PathBuf::from("runs"),
            mode: RetrievalMode::Loss,
            backend: BackendConfig::default(),
            corpus: CorpusConfig::default(),
            retrieval: RetrievalConfig::default(),
            keyframes: KeyframeConfig::default(),
            decode: DecodeConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::from_toml(&raw).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn from_toml(raw: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(raw).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        // TOML integers are signed 64-bit.
        for (name, s) in [("seed", self.seed), ("backend.seed", self.backend.seed)] {
            if s > i64::MAX as u64 {
                return bad(format!("{name} must be at most {}", i64::MAX));
            }
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.retrieval.k == 0 || self.retrieval.video_frames == 0 {
            return bad("retrieval.k and retrieval.video_frames must be at least 1".into());
        }
        if self.backend.dim == 0 || self.backend.lm_dim == 0 {
            return bad("backend dimensions must be at least 1".into());
        }
        if !(self.backend.lm_embedding_scale.is_finite() && self.backend.lm_embedding_scale > 0.0) {
            return bad("backend.lm_embedding_scale must be positive".into());
        }
        let kf = &self.keyframes;
        if !(kf.fps.is_finite() && kf.fps > 0.0 && kf.native_fps.is_finite() && kf.native_fps > 0.0) {
            return bad("keyframes.fps and keyframes.native_fps must be positive".into());
        }
        if !(kf.clip_threshold > 0.0 && kf.clip_threshold <= 1.0) {
            return bad(format!("keyframes.clip_threshold must lie in (0, 1], got {}", kf.clip_threshold));
        }
        if self.corpus.path.is_none() && ![BUNDLED_CORPUS, TESTSET_CORPUS].contains(&self.corpus.id.as_str()) {
            return bad(format!(
                "corpus {:?} needs a path (only {BUNDLED_CORPUS:?} and {TESTSET_CORPUS:?} are built in)",
                self.corpus.id
            ));
        }
        self.decode.validate()?;
        Ok(())
    }

    /// The configuration as recorded in artifacts: output location and worker
    /// count do not affect results, so they are blanked.
    pub fn artifact_view(&self) -> Self {
        Self {
            workers: 1,
            out_dir: PathBuf::new(),
            ..self.clone()
        }
    }

    /// Hex SHA-256 of the artifact view and the crate version, truncated to 16 digits.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(&self.artifact_view()).expect("config serializes");
        let mut h = Sha256::new();
        h.update(env!("CARGO_PKG_VERSION").as_bytes());
        h.update([0]);
        h.update(&json);
        let digest = h.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}
