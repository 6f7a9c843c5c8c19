//! Dataset manifests: which videos to caption, where their frames live and
//! their reference captions.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use retcap::keyframes::VideoSource;

use crate::error::{data_err, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub video_id: String,
    /// Directory of image files, ordered by name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<PathBuf>,
    /// Vector blob with one feature record per frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default)]
    pub references: Vec<String>,
}

impl ManifestEntry {
    pub fn load_video(&self, default_fps: f64) -> Result<VideoSource> {
        let fps = self.fps.unwrap_or(default_fps);
        let v = match (&self.frames, &self.embeddings) {
            (Some(dir), None) => VideoSource::from_image_dir(dir, fps)?,
            (None, Some(blob)) => VideoSource::from_blob(blob, fps)?,
            _ => return data_err(format!("{}: needs exactly one of frames / embeddings", self.video_id)),
        };
        Ok(v)
    }
}

/// Validated entries in file order. Paths are absolute or relative to the
/// manifest's directory.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Resolves relative paths against `base` and validates.
    pub fn new(mut entries: Vec<ManifestEntry>, base: &Path) -> Result<Self> {
        for e in &mut entries {
            for p in [&mut e.frames, &mut e.embeddings].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        let m = Self { entries };
        m.validate()?;
        Ok(m)
    }

    /// JSON lines, one [`ManifestEntry`] per line; blank lines are skipped.
    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| Error::Data(format!("cannot read manifest {}: {e}", path.display())))?;
        let mut entries = Vec::new();
        let mut problems = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<ManifestEntry>(line) {
                Ok(e) => entries.push(e),
                Err(e) => problems.push(format!("line {}: {e}", i + 1)),
            }
        }
        if !problems.is_empty() {
            return data_err(format!("{}:\n  {}", path.display(), problems.join("\n  ")));
        }
        Self::new(entries, parent(path))
    }

    /// MSR-VTT style annotations: `{"videos": [{"video_id"}], "sentences":
    /// [{"video_id", "caption"}]}`. Frames are looked up under `frames_root` as
    /// `<video_id>/` (images) or `<video_id>.frames.bin` (features). Only
    /// videos of `split` are kept when given.
    pub fn load_msrvtt(path: &Path, frames_root: &Path, split: Option<&str>) -> Result<Self> {
        #[derive(Deserialize)]
        struct Video {
            video_id: String,
            #[serde(default)]
            split: Option<String>,
        }
        #[derive(Deserialize)]
        struct Sentence {
            video_id: String,
            caption: String,
        }
        #[derive(Deserialize)]
        struct Annotations {
            videos: Vec<Video>,
            sentences: Vec<Sentence>,
        }
        let raw = std::fs::read(path)
            .map_err(|e| Error::Data(format!("cannot read annotations {}: {e}", path.display())))?;
        let ann: Annotations = serde_json::from_slice(&raw)
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let mut refs: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for s in &ann.sentences {
            refs.entry(s.video_id.as_str()).or_default().push(s.caption.clone());
        }
        let entries = ann
            .videos
            .iter()
            .filter(|v| split.is_none_or(|s| v.split.as_deref() == Some(s)))
            .map(|v| {
                let dir = frames_root.join(&v.video_id);
                let blob = frames_root.join(format!("{}.frames.bin", v.video_id));
                let (frames, embeddings) = if blob.is_file() { (None, Some(blob)) } else { (Some(dir), None) };
                ManifestEntry {
                    video_id: v.video_id.clone(),
                    frames,
                    embeddings,
                    fps: None,
                    references: refs.get(v.video_id.as_str()).cloned().unwrap_or_default(),
                }
            })
            .collect();
        Self::new(entries, parent(path))
    }

    /// Reports every problem at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.entries.is_empty() {
            problems.push("manifest has no entries".to_string());
        }
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            let id = &e.video_id;
            if id.trim().is_empty() {
                problems.push("entry with an empty video_id".into());
            } else if !seen.insert(id.as_str()) {
                problems.push(format!("{id}: duplicate video_id"));
            }
            match (&e.frames, &e.embeddings) {
                (Some(_), Some(_)) | (None, None) => {
                    problems.push(format!("{id}: needs exactly one of frames / embeddings"))
                }
                (Some(d), None) if !d.is_dir() => {
                    problems.push(format!("{id}: frame directory {} not found", d.display()))
                }
                (None, Some(f)) if !f.is_file() => {
                    problems.push(format!("{id}: embedding blob {} not found", f.display()))
                }
                _ => {}
            }
            if let Some(fps) = e.fps {
                if !(fps.is_finite() && fps > 0.0) {
                    problems.push(format!("{id}: fps must be positive, got {fps}"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            data_err(format!("invalid manifest:\n  {}", problems.join("\n  ")))
        }
    }

    pub fn get(&self, video_id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.video_id == video_id)
    }

    /// Every reference caption, in manifest order.
    pub fn all_references(&self) -> Vec<String> {
        self.entries.iter().flat_map(|e| e.references.iter().cloned()).collect()
    }
}

fn parent(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}
