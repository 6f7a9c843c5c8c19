//! File-backed visual embeddings.
//!
//! A store directory holds, per video id, `<id>.frames.bin` (one vector per
//! frame) and optionally `<id>.video.bin` (a single video-level vector), both in
//! the [`blob`](super::blob) format. The `files` backend uses these in place of
//! a visual model; text towers and the language model come from the toy suite.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::toy::{HashEmbedder, ToyBackendConfig, ToyParts, ToySentenceScorer};
use super::{blob, BackendSuite, EmbeddingVector, Frame, ImageTextScorer, VideoEncoder};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct EmbeddingStore {
    dir: PathBuf,
}

impl EmbeddingStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn frames_path(&self, video_id: &str) -> PathBuf {
        self.dir.join(format!("{video_id}.frames.bin"))
    }

    pub fn video_path(&self, video_id: &str) -> PathBuf {
        self.dir.join(format!("{video_id}.video.bin"))
    }

    pub fn load_frames(&self, video_id: &str) -> Result<Vec<Frame>> {
        load_frame_blob(&self.frames_path(video_id))
    }

    /// The stored video-level embedding, if one was written.
    pub fn load_video_embedding(&self, video_id: &str) -> Result<Option<EmbeddingVector>> {
        let path = self.video_path(video_id);
        if !path.exists() {
            return Ok(None);
        }
        let mut vs = blob::read_file(&path)?;
        if vs.len() != 1 {
            return Err(Error::Input(format!(
                "{} should hold exactly one vector, found {}",
                path.display(),
                vs.len()
            )));
        }
        EmbeddingVector::normalized(vs.remove(0)).map(Some)
    }

    pub fn write_frames(&self, video_id: &str, frames: &[Vec<f64>]) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        blob::write_file(&self.frames_path(video_id), frames)
    }

    pub fn write_video_embedding(&self, video_id: &str, emb: &EmbeddingVector) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        blob::write_file(&self.video_path(video_id), &[emb.as_slice().to_vec()])
    }
}

/// Frames from a blob file, one feature frame per record.
pub fn load_frame_blob(path: &Path) -> Result<Vec<Frame>> {
    let vs = blob::read_file(path)?;
    if vs.is_empty() {
        return Err(Error::Input(format!("{} holds no frames", path.display())));
    }
    Ok(vs.into_iter().map(Frame::from_features).collect())
}

fn features(frame: &Frame, dim: usize) -> Result<EmbeddingVector> {
    match frame {
        Frame::Features(v) if v.len() == dim => EmbeddingVector::normalized(v.to_vec()),
        Frame::Features(v) => Err(Error::Config(format!(
            "precomputed frame has width {}, expected {dim}",
            v.len()
        ))),
        Frame::Pixels(_) => Err(Error::Config(
            "the files backend only accepts precomputed frame embeddings".into(),
        )),
    }
}

/// Visual tower that passes precomputed features through (normalized).
pub struct PrecomputedVisual {
    text: Arc<HashEmbedder>,
}

impl VideoEncoder for PrecomputedVisual {
    fn dim(&self) -> usize {
        self.text.dim()
    }

    fn encode_frames(&self, frames: &[Frame]) -> Result<EmbeddingVector> {
        let embs = frames
            .iter()
            .map(|f| features(f, self.text.dim()))
            .collect::<Result<Vec<_>>>()?;
        EmbeddingVector::mean(&embs)
    }

    fn encode_text(&self, text: &str) -> Result<EmbeddingVector> {
        self.text.embed(text)
    }

    fn parameter_checksum(&self) -> u64 {
        self.text.dim() as u64
    }
}

impl ImageTextScorer for PrecomputedVisual {
    fn dim(&self) -> usize {
        self.text.dim()
    }

    fn embed_image(&self, frame: &Frame) -> Result<EmbeddingVector> {
        features(frame, self.text.dim())
    }

    fn embed_text(&self, text: &str) -> Result<EmbeddingVector> {
        self.text.embed(text)
    }

    fn parameter_checksum(&self) -> u64 {
        self.text.dim() as u64
    }
}

/// Suite for the `files` backend.
pub fn files_suite(cfg: &ToyBackendConfig) -> BackendSuite {
    let parts = ToyParts::new(cfg);
    let visual = Arc::new(PrecomputedVisual {
        text: parts.text.clone(),
    });
    BackendSuite {
        video: visual.clone(),
        image_text: visual,
        lm: parts.lm.clone(),
        sentence: Arc::new(ToySentenceScorer::new(parts.text.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let store = EmbeddingStore::new(dir.path());
        store.write_frames("v1", &[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let frames = store.load_frames("v1").unwrap();
        assert_eq!(frames.len(), 2);
        assert!(store.load_video_embedding("v1").unwrap().is_none());
        let e = EmbeddingVector::normalized(vec![3.0, 4.0]).unwrap();
        store.write_video_embedding("v1", &e).unwrap();
        let back = store.load_video_embedding("v1").unwrap().unwrap();
        assert!((back.as_slice()[0] - 0.6).abs() < 1e-6);
        assert!(store.load_frames("missing").is_err());
    }

    #[test]
    fn files_suite_rejects_pixels() {
        let suite = files_suite(&ToyBackendConfig { dim: 8, ..Default::default() });
        let px = Frame::Pixels(Arc::new(image::RgbImage::new(2, 2)));
        assert!(suite.image_text.embed_image(&px).is_err());
        assert!(suite.image_text.embed_image(&Frame::from_features(vec![1.0; 8])).is_ok());
    }
}
