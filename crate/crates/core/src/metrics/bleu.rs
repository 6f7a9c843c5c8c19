use std::collections::BTreeMap;

use super::{ngram_counts, EvalCorpus, Ngram};
use crate::error::Result;

const MAX_N: usize = 4;

/// Corpus BLEU@4: clipped n-gram precisions summed over the corpus, uniform
/// geometric mean, brevity penalty against the closest reference length
/// (shorter wins ties). No smoothing, so any zero precision gives 0.
pub fn bleu4(corpus: &EvalCorpus) -> Result<f64> {
    corpus.validate()?;
    let mut correct = [0usize; MAX_N];
    let mut guess = [0usize; MAX_N];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);

    for (cand, refs) in corpus.tokenized() {
        let mut max_ref: BTreeMap<Ngram<'_>, usize> = BTreeMap::new();
        for r in &refs {
            for (g, c) in ngram_counts(r, MAX_N) {
                let e = max_ref.entry(g).or_insert(0);
                *e = (*e).max(c);
            }
        }
        for (g, c) in ngram_counts(&cand, MAX_N) {
            correct[g.len() - 1] += c.min(max_ref.get(g).copied().unwrap_or(0));
        }
        for (n, slot) in guess.iter_mut().enumerate() {
            *slot += (cand.len() + 1).saturating_sub(n + 1);
        }
        cand_len += cand.len();
        ref_len += refs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| (l.abs_diff(cand.len()), l))
            .expect("validated: at least one reference");
    }

    if correct.contains(&0) {
        return Ok(0.0);
    }
    let log_p: f64 = (0..MAX_N)
        .map(|n| (correct[n] as f64 / guess[n] as f64).ln())
        .sum::<f64>()
        / MAX_N as f64;
    let bp = if cand_len < ref_len {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    } else {
        1.0
    };
    Ok(bp * log_p.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(items: &[(&str, &[&str])]) -> EvalCorpus {
        EvalCorpus::from_pairs(items.iter().enumerate().map(|(i, (c, r))| {
            (i.to_string(), c.to_string(), r.iter().map(|s| s.to_string()).collect())
        }))
        .unwrap()
    }

    #[test]
    fn identical_is_one() {
        let c = corpus(&[("a man is cooking food", &["a man is cooking food"]), ("a dog runs in the park", &["a dog runs in the park"])]);
        assert!((bleu4(&c).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_is_zero() {
        let c = corpus(&[("red blue green", &["one two three four"])]);
        assert_eq!(bleu4(&c).unwrap(), 0.0);
    }

    #[test]
    fn short_candidate_is_penalized() {
        // All precisions are 1, so only the brevity penalty remains.
        let c = corpus(&[("a b c d", &["a b c d e f"])]);
        assert!((bleu4(&c).unwrap() - (1.0f64 - 6.0 / 4.0).exp()).abs() < 1e-12);
    }
}
