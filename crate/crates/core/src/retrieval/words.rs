use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartOfSpeech {
    Noun,
    Verb,
}

/// Assigns a coarse part of speech to a lowercase word; `None` means "neither
/// noun nor verb" and excludes the word from sampling.
pub trait PosTagger: Send + Sync {
    fn tag(&self, word: &str) -> Option<PartOfSpeech>;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCount {
    pub word: String,
    pub count: usize,
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(is_vowel)
}

/// Drop one letter of a doubled final consonant ("cutt" → "cut"), except l, s, z.
fn undouble(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z') {
        stem[..n - 1].to_string()
    } else {
        stem.to_string()
    }
}

/// Light suffix stripper: -ing, -ed (with consonant-doubling undo), -ies, -es, -s.
///
/// Stems shorter than three letters or without a vowel are left alone, as are
/// "-ed" words where the suffix follows `a`/`e` ("bread", "need").
pub fn light_stem(word: &str) -> String {
    let w = word;
    let n = w.len();
    if n <= 3 || !w.is_ascii() {
        return w.to_string();
    }
    if let Some(stem) = w.strip_suffix("ing") {
        if stem.len() >= 3 && has_vowel(stem) {
            return undouble(stem);
        }
        return w.to_string();
    }
    if let Some(stem) = w.strip_suffix("ed") {
        let before = stem.as_bytes()[stem.len() - 1];
        if stem.len() >= 3 && has_vowel(stem) && !matches!(before, b'a' | b'e') {
            return undouble(stem);
        }
        return w.to_string();
    }
    if let Some(stem) = w.strip_suffix("ies") {
        if stem.len() >= 2 {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = w.strip_suffix("es") {
        if ["s", "sh", "ch", "x", "z"].iter().any(|s| stem.ends_with(s)) && stem.len() >= 3 {
            return stem.to_string();
        }
    }
    if let Some(stem) = w.strip_suffix('s') {
        if !(stem.ends_with('s') || stem.ends_with('u') || stem.ends_with('i')) && stem.len() >= 3 {
            return stem.to_string();
        }
    }
    w.to_string()
}

const STOP_WORDS: &[&str] = &[
    "a", "an", "the", "is", "are", "was", "were", "be", "been", "being", "am", "has", "have",
    "had", "do", "does", "did", "of", "in", "on", "at", "to", "from", "with", "by", "for", "and",
    "or", "but", "while", "as", "into", "onto", "over", "under", "up", "down", "out", "about",
    "it", "its", "he", "she", "they", "them", "him", "his", "her", "hers", "their", "this",
    "that", "these", "those", "there", "here", "some", "very", "other", "another", "who", "which",
    "what", "where", "when", "how", "then", "than", "so", "not", "no", "all", "each", "one",
    "two", "three", "someone", "something", "can", "will", "would", "should", "could", "may",
    "also", "just", "new", "red", "blue", "green", "white", "black", "little", "big", "small",
    "young", "old", "front", "around", "through", "near", "next", "together", "different",
];

const NOUNS: &[&str] = &[
    "man", "woman", "person", "people", "boy", "girl", "child", "kid", "baby", "guy", "lady",
    "men", "women", "children", "player", "team", "group", "crowd", "chef", "singer", "reporter",
    "character", "cat", "kitten", "dog", "puppy", "horse", "bird", "fish", "animal", "mouse",
    "monster", "car", "truck", "bus", "bike", "bicycle", "motorcycle", "road", "street",
    "highway", "water", "pool", "beach", "ocean", "sea", "wave", "river", "field", "ball",
    "soccer", "football", "basketball", "tennis", "goal", "game", "match", "guitar", "piano",
    "drum", "song", "music", "stage", "band", "food", "bread", "loaf", "tomato", "onion",
    "potato", "meat", "chicken", "egg", "pan", "pot", "bowl", "plate", "knife", "board",
    "kitchen", "table", "chair", "bed", "room", "house", "door", "window", "tree", "grass",
    "forest", "snow", "mountain", "sky", "computer", "phone", "screen", "camera", "video",
    "movie", "cartoon", "news", "interview", "speech", "product", "book", "paper", "dress",
    "shirt", "hair", "face", "hand", "makeup", "track", "tv", "recipe", "dish", "cheese",
    "sauce", "pasta", "salad", "vegetable", "fruit", "apple", "rice", "soup", "toy", "doll",
    "box", "bag", "bottle", "cup", "glass", "wall", "floor", "building", "city", "park",
    "garden", "boat", "ship", "plane", "train", "minecraft", "park", "show",
];

const VERBS: &[&str] = &[
    "cut", "slice", "chop", "cook", "stir", "mix", "pour", "add", "fry", "bake", "eat",
    "drink", "play", "sing", "dance", "run", "walk", "jump", "swim", "ride", "drive", "talk",
    "speak", "show", "explain", "describe", "sit", "stand", "lie", "sleep", "watch", "look",
    "hold", "throw", "catch", "kick", "hit", "shoot", "score", "climb", "fall", "fly", "race",
    "fight", "laugh", "smile", "cry", "wear", "brush", "apply", "put", "open", "close", "draw",
    "paint", "write", "read", "type", "work", "build", "fix", "clean", "wash", "perform",
    "chase", "bark", "roll", "spin", "ski", "surf", "skate", "move", "crash", "make", "give",
    "interview", "sit", "stir", "prepare", "demonstrate", "serve",
];

/// Lexicon tagger: bundled noun/verb lists consulted on the word and its light
/// stem, then suffix heuristics (-ing → verb; -tion/-ment/-ness/-ity → noun).
/// Stop words are never tagged.
#[derive(Clone, Debug)]
pub struct LexiconTagger {
    stop: HashSet<String>,
    nouns: HashSet<String>,
    verbs: HashSet<String>,
}

impl Default for LexiconTagger {
    fn default() -> Self {
        Self::new(NOUNS.iter().copied(), VERBS.iter().copied())
    }
}

impl LexiconTagger {
    pub fn new<'a>(
        nouns: impl IntoIterator<Item = &'a str>,
        verbs: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        Self {
            stop: STOP_WORDS.iter().map(|w| w.to_string()).collect(),
            nouns: nouns.into_iter().map(str::to_string).collect(),
            verbs: verbs.into_iter().map(str::to_string).collect(),
        }
    }
}

impl PosTagger for LexiconTagger {
    fn tag(&self, word: &str) -> Option<PartOfSpeech> {
        if word.is_empty() || self.stop.contains(word) {
            return None;
        }
        let stem = light_stem(word);
        let lookup = |set: &HashSet<String>| set.contains(word) || set.contains(&stem);
        if lookup(&self.nouns) {
            return Some(PartOfSpeech::Noun);
        }
        if lookup(&self.verbs) {
            return Some(PartOfSpeech::Verb);
        }
        if word.len() >= 5 && word.ends_with("ing") {
            return Some(PartOfSpeech::Verb);
        }
        if ["tion", "ment", "ness", "ity"].iter().any(|s| word.ends_with(s)) {
            return Some(PartOfSpeech::Noun);
        }
        None
    }
}

/// Lowercase, punctuation-free word tokens ("man's" → "man").
fn word_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|t| {
            let t = t.to_lowercase();
            let t = t.strip_suffix("'s").unwrap_or(&t).to_string();
            t.replace('\'', "")
        })
        .filter(|t| !t.is_empty())
}

/// Top-`l` noun/verb stems by occurrence count across `sentences`.
///
/// Occurrences are folded by [`light_stem`]; the reported word is the most
/// frequent surface variant of each stem. Ties (in count, then in variant
/// frequency) break lexicographically.
pub fn sample_high_frequency_words<S: AsRef<str>>(
    sentences: &[S],
    l: usize,
    tagger: &dyn PosTagger,
) -> Vec<WordCount> {
    // stem -> (total, surface -> count)
    let mut counts: BTreeMap<String, (usize, BTreeMap<String, usize>)> = BTreeMap::new();
    for s in sentences {
        for tok in word_tokens(s.as_ref()) {
            if tagger.tag(&tok).is_none() {
                continue;
            }
            let entry = counts.entry(light_stem(&tok)).or_default();
            entry.0 += 1;
            *entry.1.entry(tok).or_default() += 1;
        }
    }
    let mut ranked: Vec<WordCount> = counts
        .into_values()
        .map(|(count, variants)| {
            // Lexicographic iteration: keep the first variant with the highest count.
            let word = variants
                .iter()
                .fold(None::<(&String, usize)>, |best, (w, &c)| match best {
                    Some((_, bc)) if bc >= c => best,
                    _ => Some((w, c)),
                })
                .map(|(w, _)| w.clone())
                .unwrap_or_default();
            WordCount { word, count }
        })
        .collect();
    ranked.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.word.cmp(&b.word)));
    ranked.truncate(l);
    ranked
}
