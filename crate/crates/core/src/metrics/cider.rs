use std::collections::BTreeMap;

use super::{ngram_counts, EvalCorpus, Ngram};
use crate::error::Result;

const MAX_N: usize = 4;
pub const CIDER_SIGMA: f64 = 6.0;

struct TfIdf<'a> {
    vec: [BTreeMap<Ngram<'a>, f64>; MAX_N],
    norm: [f64; MAX_N],
    /// Bigram count, which the reference toolkit uses as the length term.
    length: f64,
}

fn tfidf<'a>(tokens: &'a [String], df: &BTreeMap<Ngram<'a>, f64>, ref_len: f64) -> TfIdf<'a> {
    let mut out = TfIdf {
        vec: Default::default(),
        norm: [0.0; MAX_N],
        length: 0.0,
    };
    for (g, tf) in ngram_counts(tokens, MAX_N) {
        let n = g.len() - 1;
        let idf = ref_len - df.get(g).copied().unwrap_or(0.0).max(1.0).ln();
        let w = tf as f64 * idf;
        out.vec[n].insert(g, w);
        out.norm[n] += w * w;
        if n == 1 {
            out.length += tf as f64;
        }
    }
    out.norm.iter_mut().for_each(|n| *n = n.sqrt());
    out
}

fn sim(hyp: &TfIdf<'_>, r: &TfIdf<'_>) -> f64 {
    let delta = hyp.length - r.length;
    let penalty = (-(delta * delta) / (2.0 * CIDER_SIGMA * CIDER_SIGMA)).exp();
    let mut total = 0.0;
    for n in 0..MAX_N {
        let mut val = 0.0;
        for (g, h) in &hyp.vec[n] {
            let rv = r.vec[n].get(g).copied().unwrap_or(0.0);
            val += h.min(rv) * rv;
        }
        if hyp.norm[n] != 0.0 && r.norm[n] != 0.0 {
            val /= hyp.norm[n] * r.norm[n];
        }
        total += val * penalty;
    }
    total / MAX_N as f64
}

/// Per-item CIDEr-D in corpus (id) order.
///
/// Document frequency counts each item's reference set once per n-gram, and
/// the IDF normalizer is `ln(#items)`, so one-item corpora score 0.
pub fn cider_items(corpus: &EvalCorpus) -> Result<Vec<f64>> {
    corpus.validate()?;
    if corpus.len() == 1 {
        log::warn!("CIDEr on a single item: document frequencies are degenerate");
    }
    let items = corpus.tokenized();
    let mut df: BTreeMap<Ngram<'_>, f64> = BTreeMap::new();
    for (_, refs) in &items {
        let mut seen: Vec<Ngram<'_>> = refs.iter().flat_map(|r| ngram_counts(r, MAX_N).into_keys()).collect();
        seen.sort_unstable();
        seen.dedup();
        for g in seen {
            *df.entry(g).or_insert(0.0) += 1.0;
        }
    }
    let ref_len = (items.len() as f64).ln();
    Ok(items
        .iter()
        .map(|(cand, refs)| {
            let hyp = tfidf(cand, &df, ref_len);
            let sum: f64 = refs.iter().map(|r| sim(&hyp, &tfidf(r, &df, ref_len))).sum();
            10.0 * sum / refs.len() as f64
        })
        .collect())
}

/// Mean per-item CIDEr-D.
pub fn cider(corpus: &EvalCorpus) -> Result<f64> {
    let s = cider_items(corpus)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}
