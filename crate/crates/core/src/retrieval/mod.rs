//! Sentence retrieval from a text corpus and high-frequency word sampling.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backends::{blob, EmbeddingVector, VideoEncoder};
use crate::error::{input_err, Error, Result};

mod words;

pub use words::{
    light_stem, sample_high_frequency_words, LexiconTagger, PartOfSpeech, PosTagger, WordCount,
};

pub const DEFAULT_TOP_K: usize = 15;
pub const DEFAULT_TOP_L: usize = 5;

/// Exact dot-product index over corpus sentences.
#[derive(Clone, Debug)]
pub struct CorpusIndex {
    corpus_id: String,
    sentences: Vec<String>,
    embeddings: Vec<EmbeddingVector>,
    /// Empty lines dropped while building.
    skipped: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexMeta {
    corpus_id: String,
    #[serde(rename = "D")]
    dim: usize,
    count: usize,
    #[serde(default)]
    skipped: usize,
}

const META_FILE: &str = "meta.json";
const SENTENCES_FILE: &str = "sentences.json";
const EMBEDDINGS_FILE: &str = "embeddings.bin";

/// Embed every non-empty sentence with the retrieval text tower, preserving order.
pub fn build_index(
    corpus: &[String],
    encoder: &dyn VideoEncoder,
    corpus_id: &str,
) -> Result<CorpusIndex> {
    if corpus.is_empty() {
        return input_err("cannot build an index from an empty corpus");
    }
    let mut sentences = Vec::with_capacity(corpus.len());
    let mut embeddings = Vec::with_capacity(corpus.len());
    let mut skipped = 0;
    for s in corpus {
        let s = s.trim();
        if s.is_empty() {
            skipped += 1;
            continue;
        }
        embeddings.push(encoder.encode_text(s)?);
        sentences.push(s.to_string());
    }
    if skipped > 0 {
        log::warn!("corpus {corpus_id}: skipped {skipped} empty sentence(s)");
    }
    if sentences.is_empty() {
        return input_err("corpus contains only empty sentences");
    }
    Ok(CorpusIndex {
        corpus_id: corpus_id.to_string(),
        sentences,
        embeddings,
        skipped,
    })
}

impl CorpusIndex {
    pub fn corpus_id(&self) -> &str {
        &self.corpus_id
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }

    pub fn embeddings(&self) -> &[EmbeddingVector] {
        &self.embeddings
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn dim(&self) -> usize {
        self.embeddings.first().map_or(0, EmbeddingVector::dim)
    }

    /// Writes `meta.json`, `sentences.json` and `embeddings.bin` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let meta = IndexMeta {
            corpus_id: self.corpus_id.clone(),
            dim: self.dim(),
            count: self.len(),
            skipped: self.skipped,
        };
        fs::write(dir.join(META_FILE), serde_json::to_vec_pretty(&meta)?)?;
        fs::write(dir.join(SENTENCES_FILE), serde_json::to_vec(&self.sentences)?)?;
        let rows: Vec<Vec<f64>> = self.embeddings.iter().map(|e| e.as_slice().to_vec()).collect();
        blob::write_file(&dir.join(EMBEDDINGS_FILE), &rows)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: IndexMeta = serde_json::from_slice(&fs::read(dir.join(META_FILE))?)?;
        let sentences: Vec<String> = serde_json::from_slice(&fs::read(dir.join(SENTENCES_FILE))?)?;
        let rows = blob::read_file(&dir.join(EMBEDDINGS_FILE))?;
        if rows.len() != meta.count || sentences.len() != meta.count {
            return Err(Error::Input(format!(
                "index {} is inconsistent: meta count {}, {} sentences, {} embeddings",
                dir.display(),
                meta.count,
                sentences.len(),
                rows.len()
            )));
        }
        if rows.iter().any(|r| r.len() != meta.dim) {
            return Err(Error::Input(format!(
                "index {} has rows whose width differs from D = {}",
                dir.display(),
                meta.dim
            )));
        }
        if meta.count == 0 {
            return input_err(format!("index {} is empty", dir.display()));
        }
        let embeddings = rows
            .into_iter()
            .map(EmbeddingVector::normalized)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            corpus_id: meta.corpus_id,
            sentences,
            embeddings,
            skipped: meta.skipped,
        })
    }

    /// True when `dir` looks like a saved index.
    pub fn is_index_dir(dir: &Path) -> bool {
        dir.is_dir() && dir.join(META_FILE).is_file()
    }
}

/// Reads a corpus: UTF-8 with one sentence per line, or JSON lines `{"text": ...}`.
pub fn load_corpus_file(path: &Path) -> Result<Vec<String>> {
    let raw = fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read corpus {}: {e}", path.display())))?;
    parse_corpus(&raw)
}

#[derive(Deserialize)]
struct CorpusLine {
    text: String,
}

pub fn parse_corpus(raw: &str) -> Result<Vec<String>> {
    raw.lines()
        .enumerate()
        .map(|(i, line)| {
            if line.trim_start().starts_with('{') {
                serde_json::from_str::<CorpusLine>(line)
                    .map(|l| l.text)
                    .map_err(|e| Error::Input(format!("corpus line {}: {e}", i + 1)))
            } else {
                Ok(line.to_string())
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredSentence {
    /// Row in the corpus index.
    pub index: usize,
    pub text: String,
    pub score: f64,
}

/// Top `min(k, |index|)` sentences by dot product with `video`, ties by corpus order.
pub fn retrieve(video: &EmbeddingVector, index: &CorpusIndex, k: usize) -> Result<Vec<ScoredSentence>> {
    if k == 0 {
        return input_err("K must be at least 1");
    }
    if index.is_empty() {
        return input_err("cannot retrieve from an empty index");
    }
    if video.dim() != index.dim() {
        return Err(Error::Config(format!(
            "video embedding width {} does not match index width {}",
            video.dim(),
            index.dim()
        )));
    }
    let scores: Vec<f64> = index.embeddings.iter().map(|e| video.dot(e)).collect();
    let order = crate::util::argsort_desc(&scores);
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| ScoredSentence {
            index: i,
            text: index.sentences[i].clone(),
            score: scores[i],
        })
        .collect())
}

/// Retrieved sentences 𝓡 and high-frequency words 𝒲 for one video.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalContext {
    pub sentences: Vec<ScoredSentence>,
    pub words: Vec<WordCount>,
}

impl RetrievalContext {
    pub fn sentence_texts(&self) -> Vec<String> {
        self.sentences.iter().map(|s| s.text.clone()).collect()
    }

    pub fn word_texts(&self) -> Vec<String> {
        self.words.iter().map(|w| w.word.clone()).collect()
    }
}

/// Retrieve top-`k` sentences then sample the top-`l` nouns/verbs among them.
pub fn retrieve_context(
    video: &EmbeddingVector,
    index: &CorpusIndex,
    k: usize,
    l: usize,
    tagger: &dyn PosTagger,
) -> Result<RetrievalContext> {
    let sentences = retrieve(video, index, k)?;
    let texts: Vec<&str> = sentences.iter().map(|s| s.text.as_str()).collect();
    let words = sample_high_frequency_words(&texts, l, tagger);
    Ok(RetrievalContext { sentences, words })
}
