#![allow(dead_code)]

use retcap::backends::toy::{bundled_captions, ToyBackendConfig, ToyParts};
use retcap::backends::{encode_video, BackendSuite, DEFAULT_RETRIEVAL_FRAMES};
use retcap::keyframes::{select_keyframes, KeyframeSet, DEFAULT_CLIP_THRESHOLD};
use retcap::retrieval::LexiconTagger;
use retcap::retrieval::{build_index, retrieve_context, CorpusIndex, RetrievalContext};
use retcap::Frame;

pub struct Toy {
    pub parts: ToyParts,
    pub suite: BackendSuite,
    pub index: CorpusIndex,
}

pub fn toy() -> Toy {
    toy_with(&ToyBackendConfig::default())
}

pub fn toy_with(cfg: &ToyBackendConfig) -> Toy {
    let parts = ToyParts::new(cfg);
    let suite = parts.suite();
    let corpus: Vec<String> = bundled_captions().iter().map(|s| s.to_string()).collect();
    let index = build_index(&corpus, suite.video.as_ref(), "bundled").unwrap();
    Toy { parts, suite, index }
}

impl Toy {
    pub fn frames(&self, scenes: &[(&str, usize)], seed: u64) -> Vec<Frame> {
        self.parts.synth_frames(scenes, 0.3, seed).unwrap()
    }

    /// Retrieval context (K, L) and keyframes for a synthetic video.
    pub fn prepare(&self, frames: &[Frame], k: usize, l: usize) -> (RetrievalContext, KeyframeSet) {
        let v = encode_video(self.suite.video.as_ref(), frames, DEFAULT_RETRIEVAL_FRAMES).unwrap();
        let ctx = retrieve_context(&v, &self.index, k, l, &LexiconTagger::default()).unwrap();
        let keys = select_keyframes(frames, self.suite.image_text.as_ref(), DEFAULT_CLIP_THRESHOLD).unwrap();
        (ctx, keys)
    }
}
