use std::collections::{BTreeSet, HashMap};

use crate::backends::TokenId;

pub const UNK: &str = "<unk>";
const PUNCTUATION: [&str; 4] = [".", ",", "!", "?"];

/// Lowercase and split into word runs and single punctuation marks.
///
/// Words are maximal runs of alphanumerics and apostrophes; any other
/// non-whitespace character becomes its own token.
pub fn split_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '\'' {
            word.extend(c.to_lowercase());
        } else {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn is_punct(tok: &str) -> bool {
    tok.chars().all(|c| !c.is_alphanumeric() && c != '\'')
}

/// Whitespace + punctuation tokenizer over a fixed vocabulary.
#[derive(Clone, Debug)]
pub struct ToyTokenizer {
    vocab: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl ToyTokenizer {
    /// Vocabulary = `<unk>`, the punctuation marks, then every word of `texts` in sorted order.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let words: BTreeSet<String> = texts
            .into_iter()
            .flat_map(split_tokens)
            .filter(|t| !is_punct(t))
            .collect();
        let vocab: Vec<String> = std::iter::once(UNK.to_string())
            .chain(PUNCTUATION.iter().map(|p| p.to_string()))
            .chain(words)
            .collect();
        let index = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as TokenId))
            .collect();
        Self { vocab, index }
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.vocab.get(id as usize).map(String::as_str)
    }

    pub fn unk_id(&self) -> TokenId {
        0
    }

    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        split_tokens(text)
            .iter()
            .map(|t| self.id(t).unwrap_or(self.unk_id()))
            .collect()
    }

    /// Joins tokens with spaces; punctuation attaches to the preceding token.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        let mut out = String::new();
        for &id in ids {
            let tok = self.token(id).unwrap_or(UNK);
            if !out.is_empty() && !is_punct(tok) {
                out.push(' ');
            }
            out.push_str(tok);
        }
        out
    }
}
