//! Corpus-level caption metrics: BLEU@4, ROUGE-L and CIDEr-D.
//!
//! All three share [`tokenize`]. Scores follow the formulas of the widely used
//! COCO caption evaluation toolkit, applied to our own tokenization.

mod bleu;
mod cider;
mod rouge;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};

pub use bleu::bleu4;
pub use cider::{cider, cider_items, CIDER_SIGMA};
pub use rouge::{lcs_len, rouge_l, rouge_l_item, ROUGE_BETA};

/// Lowercase, drop apostrophes, turn all other punctuation into spaces, split on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| *c != '\'' && *c != '’')
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect();
    cleaned.split_whitespace().map(|w| w.to_lowercase()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalItem {
    pub candidate: String,
    pub references: Vec<String>,
}

/// Candidates with their references, keyed (and therefore ordered) by video id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalCorpus {
    pub items: BTreeMap<String, EvalItem>,
}

impl EvalCorpus {
    pub fn new(items: BTreeMap<String, EvalItem>) -> Result<Self> {
        let c = Self { items };
        c.validate()?;
        Ok(c)
    }

    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, String, Vec<String>)>,
        S: Into<String>,
    {
        let mut items = BTreeMap::new();
        for (id, candidate, references) in pairs {
            let id = id.into();
            if items.contains_key(&id) {
                return input_err(format!("duplicate item id {id:?}"));
            }
            items.insert(id, EvalItem { candidate, references });
        }
        Self::new(items)
    }

    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return input_err("evaluation corpus is empty");
        }
        let bad: Vec<&str> = self
            .items
            .iter()
            .filter(|(_, it)| !it.references.iter().any(|r| !tokenize(r).is_empty()))
            .map(|(id, _)| id.as_str())
            .collect();
        if !bad.is_empty() {
            return input_err(format!("items without a non-empty reference: {}", bad.join(", ")));
        }
        for (id, it) in &self.items {
            if tokenize(&it.candidate).is_empty() {
                log::warn!("item {id} has an empty candidate");
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Tokenized candidate and non-empty tokenized references per item.
    pub(crate) fn tokenized(&self) -> Vec<(Vec<String>, Vec<Vec<String>>)> {
        self.items
            .values()
            .map(|it| {
                let refs = it
                    .references
                    .iter()
                    .map(|r| tokenize(r))
                    .filter(|r| !r.is_empty())
                    .collect();
                (tokenize(&it.candidate), refs)
            })
            .collect()
    }
}

/// The four reported columns; METEOR is not computed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "B4")]
    pub bleu4: f64,
    #[serde(rename = "M")]
    pub meteor: Option<f64>,
    #[serde(rename = "R")]
    pub rouge_l: f64,
    #[serde(rename = "C")]
    pub cider: f64,
}

pub fn evaluate(corpus: &EvalCorpus) -> Result<MetricReport> {
    Ok(MetricReport {
        bleu4: bleu4(corpus)?,
        meteor: None,
        rouge_l: rouge_l(corpus)?,
        cider: cider(corpus)?,
    })
}

pub(crate) type Ngram<'a> = &'a [String];

/// Counts of all n-grams of order `1..=max_n`.
pub(crate) fn ngram_counts(tokens: &[String], max_n: usize) -> BTreeMap<Ngram<'_>, usize> {
    let mut out = BTreeMap::new();
    for n in 1..=max_n {
        for w in tokens.windows(n) {
            *out.entry(w).or_insert(0) += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_strips_punctuation() {
        assert_eq!(tokenize("A man's dog, running!"), vec!["a", "mans", "dog", "running"]);
        assert_eq!(tokenize("well-known   THING."), vec!["well", "known", "thing"]);
        assert!(tokenize(" .,! ").is_empty());
    }

    #[test]
    fn validation_lists_every_bad_item() {
        let err = EvalCorpus::from_pairs([
            ("a", "x".to_string(), vec!["".to_string()]),
            ("b", "x".to_string(), vec!["fine".to_string()]),
            ("c", "x".to_string(), vec![]),
        ])
        .unwrap_err()
        .to_string();
        assert!(err.contains("a, c"), "{err}");
    }

    #[test]
    fn report_serializes_with_null_meteor() {
        let r = MetricReport { bleu4: 1.0, meteor: None, rouge_l: 0.5, cider: 2.0 };
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"B4":1.0,"M":null,"R":0.5,"C":2.0}"#);
    }
}
