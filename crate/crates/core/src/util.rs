//! Small numeric and hashing helpers shared across modules.

use std::hash::Hasher;

use fnv::FnvHasher;

/// Stable 64-bit hash of a byte string, seeded.
///
/// Used for seeding per-token RNGs and deriving per-video seeds, so it must not
/// depend on the process or the std hasher implementation.
pub fn stable_hash(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write(bytes);
    h.finish()
}

/// Hash of a slice of floats by bit pattern. Backbone checksums are built on this.
pub fn hash_f64s(state: &mut FnvHasher, values: &[f64]) {
    for v in values {
        state.write_u64(v.to_bits());
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Numerically stable log-sum-exp.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Softmax of `xs / temperature`.
pub fn softmax_with_temperature(xs: &[f64], temperature: f64) -> Vec<f64> {
    let scaled: Vec<f64> = xs.iter().map(|x| x / temperature).collect();
    softmax(&scaled)
}

pub fn softmax(xs: &[f64]) -> Vec<f64> {
    if xs.is_empty() {
        return Vec::new();
    }
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| (x - lse).exp()).collect()
}

/// Indices sorted by descending score; equal scores keep ascending index order.
pub fn argsort_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}
