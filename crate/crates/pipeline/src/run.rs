//! Captioning runs: retrieve, select keyframes, decode and pick the best
//! caption for every video of a manifest.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use retcap::backends::files::files_suite;
use retcap::backends::toy::bundled_captions;
use retcap::backends::{encode_video, BackendSuite};
use retcap::decoder::{generate_caption, DecodeConfig, LossBreakdown};
use retcap::keyframes::{sample_frames, select_keyframes_with};
use retcap::retrieval::{
    build_index, load_corpus_file, retrieve_context, CorpusIndex, LexiconTagger, ScoredSentence,
    WordCount,
};
use retcap::util::stable_hash;

use crate::config::{BackendKind, RetrievalMode, RunConfig, BUNDLED_CORPUS, TESTSET_CORPUS};
use crate::error::{data_err, Error, Result};
use crate::manifest::{DatasetManifest, ManifestEntry};

pub const RESULTS_FILE: &str = "results.json";

/// Runs with more than this share of failed videos exit with a partial failure.
pub const MAX_FAILURE_RATE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoRecord {
    pub video_id: String,
    pub best_caption: String,
    pub best_index: usize,
    pub captions: Vec<String>,
    pub prompts: Vec<String>,
    pub selection_scores: Vec<f64>,
    pub retrieved: Vec<ScoredSentence>,
    pub words: Vec<WordCount>,
    /// Indices (into the sampled frames) of the keyframes.
    pub keyframes: Vec<usize>,
    pub sampled_frames: usize,
    /// Per-step losses of the best caption.
    pub best_trace: Vec<LossBreakdown>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoFailure {
    pub video_id: String,
    pub error: String,
}

/// Contents of `results.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionRun {
    pub version: String,
    pub fingerprint: String,
    pub corpus_id: String,
    pub corpus_size: usize,
    pub config: RunConfig,
    /// Sorted by video id.
    pub records: Vec<VideoRecord>,
    pub failures: Vec<VideoFailure>,
}

impl CaptionRun {
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read(path)
            .map_err(|e| Error::Data(format!("cannot read results {}: {e}", path.display())))?;
        serde_json::from_slice(&raw).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }
}

pub fn build_suite(cfg: &RunConfig) -> BackendSuite {
    let toy = cfg.backend.toy();
    match cfg.backend.kind {
        BackendKind::Toy => BackendSuite::toy(&toy),
        BackendKind::Files => files_suite(&toy),
    }
}

/// The retrieval index named by `cfg.corpus`.
pub fn load_index(cfg: &RunConfig, manifest: &DatasetManifest, suite: &BackendSuite) -> Result<CorpusIndex> {
    let c = &cfg.corpus;
    let index = match &c.path {
        Some(p) if CorpusIndex::is_index_dir(p) => CorpusIndex::load(p)?,
        Some(p) => build_index(&load_corpus_file(p)?, suite.video.as_ref(), &c.id)?,
        None if c.id == BUNDLED_CORPUS => {
            let corpus: Vec<String> = bundled_captions().iter().map(|s| s.to_string()).collect();
            build_index(&corpus, suite.video.as_ref(), &c.id)?
        }
        None if c.id == TESTSET_CORPUS => build_index(&manifest.all_references(), suite.video.as_ref(), &c.id)?,
        None => return Err(Error::Config(format!("corpus {:?} needs a path", c.id))),
    };
    if index.dim() != suite.video.dim() {
        return data_err(format!(
            "index {} has width {}, the text tower produces {}",
            index.corpus_id(),
            index.dim(),
            suite.video.dim()
        ));
    }
    Ok(index)
}

/// Decoder settings after applying the retrieval mode.
pub fn effective_decode(cfg: &RunConfig) -> DecodeConfig {
    let mut d = cfg.decode.clone();
    if cfg.mode == RetrievalMode::Prefix {
        d.weights.sentences = 0.0;
        d.weights.words = 0.0;
    }
    d
}

pub fn caption_video(
    cfg: &RunConfig,
    suite: &BackendSuite,
    index: &CorpusIndex,
    entry: &ManifestEntry,
) -> Result<VideoRecord> {
    let video = entry.load_video(cfg.keyframes.native_fps)?;
    let emb = encode_video(suite.video.as_ref(), video.frames(), cfg.retrieval.video_frames)?;
    let ctx = retrieve_context(&emb, index, cfg.retrieval.k, cfg.retrieval.l, &LexiconTagger::default())?;
    let sampled = sample_frames(&video, cfg.keyframes.fps)?;
    let keys = select_keyframes_with(
        &sampled,
        suite.image_text.as_ref(),
        cfg.keyframes.clip_threshold,
        cfg.keyframes.reanchor,
    )?;
    let prefix = match cfg.mode {
        RetrievalMode::Loss => None,
        RetrievalMode::Prefix => Some(ctx.sentence_texts().join(" ")),
    };
    let decode = effective_decode(cfg);
    let seed = stable_hash(cfg.seed, entry.video_id.as_bytes());
    let r = generate_caption(suite, &ctx, &keys, &decode, seed, prefix.as_deref())?;
    Ok(VideoRecord {
        video_id: entry.video_id.clone(),
        best_trace: r.traces[r.best_index].clone(),
        best_caption: r.best_caption,
        best_index: r.best_index,
        captions: r.captions,
        prompts: r.prompts,
        selection_scores: r.selection_scores,
        retrieved: ctx.sentences,
        words: ctx.words,
        keyframes: keys.indices,
        sampled_frames: sampled.len(),
    })
}

/// Captions every video and writes `results.json` into `cfg.out_dir`.
///
/// Failed videos are logged and listed in the results. When more than 10% fail
/// the results are still written and [`Error::PartialFailure`] is returned.
pub fn run_caption(cfg: &RunConfig, manifest: &DatasetManifest) -> Result<CaptionRun> {
    cfg.validate()?;
    manifest.validate()?;
    let suite = build_suite(cfg);
    let index = load_index(cfg, manifest, &suite)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let outcomes: Vec<(String, Result<VideoRecord>)> = pool.install(|| {
        manifest
            .entries
            .par_iter()
            .map(|e| (e.video_id.clone(), caption_video(cfg, &suite, &index, e)))
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (video_id, outcome) in outcomes {
        match outcome {
            Ok(r) => {
                log::info!("{video_id}: {}", r.best_caption);
                records.push(r);
            }
            Err(e) => {
                log::error!("{video_id}: {e}");
                failures.push(VideoFailure {
                    video_id,
                    error: e.to_string(),
                });
            }
        }
    }
    records.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    failures.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    let run = CaptionRun {
        version: env!("CARGO_PKG_VERSION").to_string(),
        fingerprint: cfg.fingerprint(),
        corpus_id: index.corpus_id().to_string(),
        corpus_size: index.len(),
        config: cfg.artifact_view(),
        records,
        failures,
    };
    write_json(&cfg.out_dir.join(RESULTS_FILE), &run)?;

    let total = manifest.entries.len();
    let failed = run.failures.len();
    if failed as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::PartialFailure { failed, total });
    }
    Ok(run)
}

/// Retrieved sentences as a textual prefix, both retrieval losses off.
pub fn run_prefix_baseline(cfg: &RunConfig, manifest: &DatasetManifest) -> Result<CaptionRun> {
    let cfg = RunConfig {
        mode: RetrievalMode::Prefix,
        ..cfg.clone()
    };
    run_caption(&cfg, manifest)
}

/// Builds and saves an index for a corpus file; returns its directory.
pub fn run_index(cfg: &RunConfig, corpus: &Path, corpus_id: &str, out: &Path) -> Result<PathBuf> {
    cfg.validate()?;
    let suite = build_suite(cfg);
    let index = build_index(&load_corpus_file(corpus)?, suite.video.as_ref(), corpus_id)?;
    index.save(out)?;
    log::info!("indexed {} sentences ({} skipped) into {}", index.len(), index.skipped(), out.display());
    Ok(out.to_path_buf())
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}
