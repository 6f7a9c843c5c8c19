//! Fixed-rate frame sampling and anchor-threshold keyframe selection.
//!
//! Selection walks the sampled frames in order with a running anchor. Frame 0
//! is always admitted. A later frame is admitted when its image-embedding dot
//! product with the anchor is below the threshold, i.e. when it is
//! sufficiently different; the admitted frame becomes the new anchor.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::backends::files::load_frame_blob;
use crate::backends::{EmbeddingVector, Frame, ImageTextScorer};
use crate::error::{input_err, Error, Result};

pub const DEFAULT_FPS: f64 = 3.0;
pub const DEFAULT_CLIP_THRESHOLD: f64 = 0.9;

/// Decoded frames at a known native frame rate.
#[derive(Clone, Debug)]
pub struct VideoSource {
    frames: Vec<Frame>,
    native_fps: f64,
}

impl VideoSource {
    pub fn new(frames: Vec<Frame>, native_fps: f64) -> Result<Self> {
        if frames.is_empty() {
            return input_err("video has no frames");
        }
        if !(native_fps.is_finite() && native_fps > 0.0) {
            return input_err(format!("native frame rate must be positive, got {native_fps}"));
        }
        Ok(Self { frames, native_fps })
    }

    /// Image files in `dir`, ordered by file name.
    pub fn from_image_dir(dir: &Path, native_fps: f64) -> Result<Self> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::Input(format!("cannot read frame directory {}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image_path(p))
            .collect();
        paths.sort();
        let frames = paths
            .iter()
            .map(|p| load_image_frame(p))
            .collect::<Result<Vec<_>>>()?;
        if frames.is_empty() {
            return input_err(format!("no image files in {}", dir.display()));
        }
        Self::new(frames, native_fps)
    }

    /// Precomputed per-frame embeddings from a vector blob.
    pub fn from_blob(path: &Path, native_fps: f64) -> Result<Self> {
        Self::new(load_frame_blob(path)?, native_fps)
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn native_fps(&self) -> f64 {
        self.native_fps
    }

    pub fn duration_secs(&self) -> f64 {
        self.frames.len() as f64 / self.native_fps
    }
}

pub fn is_image_path(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "jpg" | "jpeg")
    )
}

pub fn load_image_frame(path: &Path) -> Result<Frame> {
    let img = image::open(path)
        .map_err(|e| Error::Input(format!("unreadable frame {}: {e}", path.display())))?;
    Ok(Frame::Pixels(Arc::new(img.to_rgb8())))
}

/// Distinct native frame indices for timestamps `k / fps`, `k = 0, 1, …` within the video.
pub fn sample_frame_indices(n_frames: usize, native_fps: f64, fps: f64) -> Result<Vec<usize>> {
    if !(fps.is_finite() && fps > 0.0) {
        return input_err(format!("sampling rate must be positive, got {fps}"));
    }
    if n_frames == 0 {
        return input_err("video has no frames");
    }
    let step = native_fps / fps;
    let mut out = Vec::new();
    for k in 0usize.. {
        // Tolerance absorbs rounding in k·step for rates that divide evenly.
        let idx = (k as f64 * step + 1e-9).floor() as usize;
        if idx >= n_frames {
            break;
        }
        // Sampling faster than the native rate revisits frames; keep each once.
        if out.last() != Some(&idx) {
            out.push(idx);
        }
    }
    Ok(out)
}

pub fn sample_frames(video: &VideoSource, fps: f64) -> Result<Vec<Frame>> {
    Ok(sample_frame_indices(video.frames.len(), video.native_fps, fps)?
        .into_iter()
        .map(|i| video.frames[i].clone())
        .collect())
}

/// How the anchor moves during selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reanchor {
    /// Only admitted frames become the anchor.
    #[default]
    Admitted,
    /// Every examined frame becomes the anchor, admitted or not.
    Every,
}

/// Deduplicated keyframes 𝓕 with their unit image embeddings.
#[derive(Clone, Debug)]
pub struct KeyframeSet {
    pub frames: Vec<Frame>,
    pub embeddings: Vec<EmbeddingVector>,
    /// Positions of the admitted frames in the input sequence.
    pub indices: Vec<usize>,
    pub threshold: f64,
}

impl KeyframeSet {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Admitted positions for a sequence of unit embeddings.
pub fn select_keyframe_indices(
    embeddings: &[EmbeddingVector],
    threshold: f64,
    reanchor: Reanchor,
) -> Result<Vec<usize>> {
    if embeddings.is_empty() {
        return input_err("keyframe selection needs at least one frame");
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return input_err(format!("threshold must lie in (0, 1], got {threshold}"));
    }
    let mut admitted = vec![0];
    let mut anchor = 0;
    for i in 1..embeddings.len() {
        let admit = embeddings[i].dot(&embeddings[anchor]) < threshold;
        if admit {
            admitted.push(i);
        }
        if admit || reanchor == Reanchor::Every {
            anchor = i;
        }
    }
    Ok(admitted)
}

pub fn select_keyframes(
    frames: &[Frame],
    scorer: &dyn ImageTextScorer,
    threshold: f64,
) -> Result<KeyframeSet> {
    select_keyframes_with(frames, scorer, threshold, Reanchor::Admitted)
}

pub fn select_keyframes_with(
    frames: &[Frame],
    scorer: &dyn ImageTextScorer,
    threshold: f64,
    reanchor: Reanchor,
) -> Result<KeyframeSet> {
    let embs = frames
        .iter()
        .map(|f| scorer.embed_image(f))
        .collect::<Result<Vec<_>>>()?;
    let indices = select_keyframe_indices(&embs, threshold, reanchor)?;
    Ok(KeyframeSet {
        frames: indices.iter().map(|&i| frames[i].clone()).collect(),
        embeddings: indices.iter().map(|&i| embs[i].clone()).collect(),
        indices,
        threshold,
    })
}
