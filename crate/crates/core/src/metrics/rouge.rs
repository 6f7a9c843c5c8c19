use super::EvalCorpus;
use crate::error::Result;

pub const ROUGE_BETA: f64 = 1.2;

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS F-measure from the best precision and best recall over the references.
pub fn rouge_l_item(cand: &[String], refs: &[Vec<String>]) -> f64 {
    if cand.is_empty() {
        return 0.0;
    }
    let (mut p, mut r) = (0.0f64, 0.0f64);
    for reference in refs {
        let l = lcs_len(reference, cand) as f64;
        p = p.max(l / cand.len() as f64);
        r = r.max(l / reference.len() as f64);
    }
    if p == 0.0 || r == 0.0 {
        return 0.0;
    }
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Mean per-item ROUGE-L.
pub fn rouge_l(corpus: &EvalCorpus) -> Result<f64> {
    corpus.validate()?;
    let items = corpus.tokenized();
    let total: f64 = items.iter().map(|(c, refs)| rouge_l_item(c, refs)).sum();
    Ok(total / items.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tokenize;

    #[test]
    fn lcs_basics() {
        let a = tokenize("the cat sat on the mat");
        let b = tokenize("the cat on a mat");
        assert_eq!(lcs_len(&a, &b), 4);
        assert_eq!(lcs_len(&a, &[]), 0);
    }

    #[test]
    fn cat_sat_vs_cat_ran() {
        // LCS 2 of 3 on both sides gives P = R = F = 2/3.
        let v = rouge_l_item(&tokenize("the cat sat"), &[tokenize("the cat ran")]);
        assert!((v - 2.0 / 3.0).abs() < 1e-12);
    }
}
