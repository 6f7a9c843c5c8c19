//! Synthetic datasets in the toy feature space, for smoke runs and tests.

use std::path::{Path, PathBuf};

use retcap::backends::toy::ToyParts;
use retcap::backends::{blob, Frame};

use crate::config::BackendConfig;
use crate::error::Result;
use crate::manifest::ManifestEntry;

/// Scene description (what the frames show) and reference captions.
pub const TOY_SCENES: [(&str, [&str; 3]); 6] = [
    ("a man is playing a guitar", ["a man plays the guitar", "a man is playing guitar on stage", "someone is playing a guitar"]),
    ("a woman is cooking food in a kitchen", ["a woman cooks in a kitchen", "a woman is cooking food", "a lady prepares food in the kitchen"]),
    ("a cat is playing with a toy", ["a cat plays with a toy", "a kitten is playing", "a cat is playing with a ball"]),
    ("a car drives down the street", ["a car is driving on the street", "a red car drives down the road", "cars are driving on a street"]),
    ("people are dancing at a party", ["people dance at a party", "a group of people are dancing", "people are dancing to music"]),
    ("a dog runs in the park", ["a dog is running in a park", "a dog runs on the grass", "a dog is playing outside"]),
];

pub const TOY_NATIVE_FPS: f64 = 30.0;
const FRAMES_PER_SCENE: usize = 30;
const NOISE: f64 = 0.3;

/// Writes `n` videos as feature blobs under `dir/frames/` and a manifest
/// `dir/manifest.jsonl`; returns the manifest path. Video `i` shows scene
/// `i mod 6`, followed by scene `i+1 mod 6` for odd `i`.
pub fn write_toy_dataset(dir: &Path, n: usize, seed: u64, backend: &BackendConfig) -> Result<PathBuf> {
    let parts = ToyParts::new(&backend.toy());
    std::fs::create_dir_all(dir.join("frames"))?;
    let mut lines = String::new();
    for i in 0..n {
        let id = format!("video{i:03}");
        let (desc, refs) = TOY_SCENES[i % TOY_SCENES.len()];
        let mut scenes = vec![(desc, FRAMES_PER_SCENE)];
        if i % 2 == 1 {
            scenes.push((TOY_SCENES[(i + 1) % TOY_SCENES.len()].0, FRAMES_PER_SCENE));
        }
        let frames = parts.synth_frames(&scenes, NOISE, seed.wrapping_add(i as u64))?;
        let rows: Vec<Vec<f64>> = frames
            .iter()
            .map(|f| match f {
                Frame::Features(v) => v.to_vec(),
                Frame::Pixels(_) => unreachable!("synthetic frames are features"),
            })
            .collect();
        let rel = PathBuf::from("frames").join(format!("{id}.frames.bin"));
        blob::write_file(&dir.join(&rel), &rows)?;
        let entry = ManifestEntry {
            video_id: id,
            frames: None,
            embeddings: Some(rel),
            fps: Some(TOY_NATIVE_FPS),
            references: refs.iter().map(|s| s.to_string()).collect(),
        };
        lines.push_str(&serde_json::to_string(&entry)?);
        lines.push('\n');
    }
    let path = dir.join("manifest.jsonl");
    std::fs::write(&path, lines)?;
    Ok(path)
}
