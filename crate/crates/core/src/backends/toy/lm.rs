use std::hash::Hasher;

use fnv::FnvHasher;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::tokenizer::ToyTokenizer;
use crate::backends::{CausalLm, TokenId};
use crate::error::{Error, Result};
use crate::util::{hash_f64s, softmax};

#[derive(Clone, Debug)]
pub struct ToyLmConfig {
    pub dim: usize,
    pub seed: u64,
    /// Multiplier on the neural logits.
    pub output_scale: f64,
    /// Multiplier on the bigram log-prior.
    pub bigram_weight: f64,
    /// Size of the exposed token embeddings. Inputs are divided by it before
    /// the first layer, so it only sets how far an optimizer step moves a
    /// prefix vector relative to the token embeddings.
    pub embedding_scale: f64,
    /// Reuse the (unscaled) input embeddings as the output projection.
    pub tie_output: bool,
}

impl Default for ToyLmConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            seed: 0,
            output_scale: 4.0,
            bigram_weight: 1.0,
            // Small enough that a 1e-4 AdamW step visibly moves the
            // candidate ranking within one caption.
            embedding_scale: 0.03,
            tie_output: false,
        }
    }
}

/// One softmax-attention layer with a residual and a bigram log-prior.
///
/// For the input rows `x_1..x_n` (prefix embeddings, then token embeddings):
///
/// ```text
/// q = Wq x_n,  k_j = Wk x_j,  v_j = Wv x_j
/// α = softmax_j(q·k_j / √D)
/// h = x_n + Σ_j α_j v_j
/// logits = scale · O h + B[last token]
/// ```
///
/// Small enough for exhaustive finite-difference checks; the prefix reaches the
/// logits through both the keys and the values.
pub struct ToyLm {
    tokenizer: ToyTokenizer,
    dim: usize,
    output_scale: f64,
    embedding_scale: f64,
    /// Exposed embeddings, `embedding_scale` times the layer's unit-scale inputs.
    embeddings: Vec<f64>,
    w_query: Vec<f64>,
    w_key: Vec<f64>,
    w_value: Vec<f64>,
    output: Vec<f64>,
    /// `V×V` log-prior indexed by previous token, empty when disabled.
    bigram: Vec<f64>,
}

struct Forward {
    xs: Vec<Vec<f64>>,
    query: Vec<f64>,
    keys: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    attn: Vec<f64>,
    hidden: Vec<f64>,
}

fn mat_vec(m: &[f64], x: &[f64], rows: usize) -> Vec<f64> {
    let cols = x.len();
    (0..rows)
        .map(|r| m[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// `acc += mᵀ g` for a square `D×D` matrix.
fn add_mat_t_vec(acc: &mut [f64], m: &[f64], g: &[f64]) {
    let d = acc.len();
    for (i, gi) in g.iter().enumerate() {
        if *gi == 0.0 {
            continue;
        }
        let row = &m[i * d..(i + 1) * d];
        for (a, w) in acc.iter_mut().zip(row) {
            *a += w * gi;
        }
    }
}

impl ToyLm {
    /// Random weights from `config.seed`; bigram prior estimated from `corpus`.
    pub fn new(tokenizer: ToyTokenizer, config: &ToyLmConfig, corpus: &[&str]) -> Self {
        let d = config.dim;
        let v = tokenizer.len();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let scale = 1.0 / (d as f64).sqrt();
        let mut gaussian = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * scale
                })
                .collect()
        };
        let unit = gaussian(v * d);
        let w_query = gaussian(d * d);
        let w_key = gaussian(d * d);
        let w_value = gaussian(d * d);
        let output = if config.tie_output { unit.clone() } else { gaussian(v * d) };
        let embeddings = unit.iter().map(|e| e * config.embedding_scale).collect();
        let bigram = if config.bigram_weight == 0.0 || corpus.is_empty() {
            Vec::new()
        } else {
            bigram_log_prior(&tokenizer, corpus)
                .into_iter()
                .map(|b| b * config.bigram_weight)
                .collect()
        };
        Self {
            tokenizer,
            dim: d,
            output_scale: config.output_scale,
            embedding_scale: config.embedding_scale,
            embeddings,
            w_query,
            w_key,
            w_value,
            output,
            bigram,
        }
    }

    /// All-zero weights: every input yields the uniform distribution.
    pub fn uniform(tokenizer: ToyTokenizer, dim: usize) -> Self {
        let v = tokenizer.len();
        Self {
            tokenizer,
            dim,
            output_scale: 1.0,
            embedding_scale: 1.0,
            embeddings: vec![0.0; v * dim],
            w_query: vec![0.0; dim * dim],
            w_key: vec![0.0; dim * dim],
            w_value: vec![0.0; dim * dim],
            output: vec![0.0; v * dim],
            bigram: Vec::new(),
        }
    }

    pub fn tokenizer(&self) -> &ToyTokenizer {
        &self.tokenizer
    }

    fn inputs(&self, prefix: &[Vec<f64>], tokens: &[TokenId]) -> Result<Vec<Vec<f64>>> {
        let mut xs = Vec::with_capacity(prefix.len() + tokens.len());
        for (i, p) in prefix.iter().enumerate() {
            if p.len() != self.dim {
                return Err(Error::Config(format!(
                    "prefix vector {i} has width {}, language model expects {}",
                    p.len(),
                    self.dim
                )));
            }
            xs.push(p.iter().map(|x| x / self.embedding_scale).collect());
        }
        for &t in tokens {
            xs.push(self.token_embedding(t)?.iter().map(|x| x / self.embedding_scale).collect());
        }
        if xs.is_empty() {
            return Err(Error::Input("language model input is empty".into()));
        }
        Ok(xs)
    }

    fn forward(&self, prefix: &[Vec<f64>], tokens: &[TokenId]) -> Result<Forward> {
        let d = self.dim;
        let xs = self.inputs(prefix, tokens)?;
        let last = xs.last().expect("non-empty");
        let query = mat_vec(&self.w_query, last, d);
        let keys: Vec<Vec<f64>> = xs.iter().map(|x| mat_vec(&self.w_key, x, d)).collect();
        let values: Vec<Vec<f64>> = xs.iter().map(|x| mat_vec(&self.w_value, x, d)).collect();
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();
        let scores: Vec<f64> = keys
            .iter()
            .map(|k| crate::util::dot(&query, k) * inv_sqrt_d)
            .collect();
        let attn = softmax(&scores);
        let mut hidden = last.clone();
        for (a, v) in attn.iter().zip(&values) {
            for (h, x) in hidden.iter_mut().zip(v) {
                *h += a * x;
            }
        }
        Ok(Forward {
            xs,
            query,
            keys,
            values,
            attn,
            hidden,
        })
    }
}

/// `ln((c(prev,next) + u(next)) / (c(prev) + 1))`, backing off to the unigram `u`.
fn bigram_log_prior(tok: &ToyTokenizer, corpus: &[&str]) -> Vec<f64> {
    let v = tok.len();
    let mut pair = vec![0.0f64; v * v];
    let mut from = vec![0.0f64; v];
    let mut uni = vec![0.0f64; v];
    let period = tok.id(".").expect("toy vocabulary has a period");
    for line in corpus {
        let mut ids = tok.encode(line);
        if ids.last() != Some(&period) {
            ids.push(period);
        }
        for &t in &ids {
            uni[t as usize] += 1.0;
        }
        for w in ids.windows(2) {
            pair[w[0] as usize * v + w[1] as usize] += 1.0;
            from[w[0] as usize] += 1.0;
        }
    }
    let total: f64 = uni.iter().sum();
    let unigram: Vec<f64> = uni
        .iter()
        .map(|c| (c + 0.01) / (total + 0.01 * v as f64))
        .collect();
    let mut out = vec![0.0; v * v];
    for p in 0..v {
        for n in 0..v {
            out[p * v + n] = ((pair[p * v + n] + unigram[n]) / (from[p] + 1.0)).ln();
        }
    }
    out
}

impl CausalLm for ToyLm {
    fn vocab_size(&self) -> usize {
        self.tokenizer.len()
    }

    fn embed_dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str) -> Vec<TokenId> {
        self.tokenizer.encode(text)
    }

    fn decode(&self, ids: &[TokenId]) -> String {
        self.tokenizer.decode(ids)
    }

    fn token_embedding(&self, id: TokenId) -> Result<&[f64]> {
        let i = id as usize;
        if i >= self.vocab_size() {
            return Err(Error::Input(format!("token id {id} outside vocabulary")));
        }
        Ok(&self.embeddings[i * self.dim..(i + 1) * self.dim])
    }

    fn logits(&self, prefix: &[Vec<f64>], tokens: &[TokenId]) -> Result<Vec<f64>> {
        let f = self.forward(prefix, tokens)?;
        let v = self.vocab_size();
        let mut logits = mat_vec(&self.output, &f.hidden, v);
        for l in logits.iter_mut() {
            *l *= self.output_scale;
        }
        if let (Some(&last), false) = (tokens.last(), self.bigram.is_empty()) {
            let row = &self.bigram[last as usize * v..(last as usize + 1) * v];
            for (l, b) in logits.iter_mut().zip(row) {
                *l += b;
            }
        }
        Ok(logits)
    }

    fn prefix_vjp(
        &self,
        prefix: &[Vec<f64>],
        tokens: &[TokenId],
        grad_logits: &[f64],
    ) -> Result<Vec<Vec<f64>>> {
        let d = self.dim;
        let v = self.vocab_size();
        if grad_logits.len() != v {
            return Err(Error::Internal(format!(
                "logit gradient has length {}, vocabulary is {v}",
                grad_logits.len()
            )));
        }
        let f = self.forward(prefix, tokens)?;
        let n = f.xs.len();

        // dL/dh = scale · Oᵀ g
        let mut g_hidden = vec![0.0; d];
        for (vi, g) in grad_logits.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            let row = &self.output[vi * d..(vi + 1) * d];
            for (gh, o) in g_hidden.iter_mut().zip(row) {
                *gh += self.output_scale * g * o;
            }
        }

        let mut g_xs = vec![vec![0.0; d]; n];
        for (gx, gh) in g_xs[n - 1].iter_mut().zip(&g_hidden) {
            *gx += gh;
        }

        // Attention readout c = Σ α_j v_j.
        let g_attn: Vec<f64> = f
            .values
            .iter()
            .map(|v| crate::util::dot(v, &g_hidden))
            .collect();
        let mean: f64 = f.attn.iter().zip(&g_attn).map(|(a, g)| a * g).sum();
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();
        let mut g_query = vec![0.0; d];
        for j in 0..n {
            let a = f.attn[j];
            let g_score = a * (g_attn[j] - mean) * inv_sqrt_d;
            let g_value: Vec<f64> = g_hidden.iter().map(|g| a * g).collect();
            let g_key: Vec<f64> = f.query.iter().map(|q| g_score * q).collect();
            for (gq, k) in g_query.iter_mut().zip(&f.keys[j]) {
                *gq += g_score * k;
            }
            add_mat_t_vec(&mut g_xs[j], &self.w_value, &g_value);
            add_mat_t_vec(&mut g_xs[j], &self.w_key, &g_key);
        }
        add_mat_t_vec(&mut g_xs[n - 1], &self.w_query, &g_query);

        g_xs.truncate(prefix.len());
        for g in g_xs.iter_mut().flatten() {
            *g /= self.embedding_scale;
        }
        Ok(g_xs)
    }

    fn parameter_checksum(&self) -> u64 {
        let mut h = FnvHasher::default();
        h.write_usize(self.dim);
        h.write_u64(self.output_scale.to_bits());
        h.write_u64(self.embedding_scale.to_bits());
        for m in [
            &self.embeddings,
            &self.w_query,
            &self.w_key,
            &self.w_value,
            &self.output,
            &self.bigram,
        ] {
            h.write_usize(m.len());
            hash_f64s(&mut h, m);
        }
        h.finish()
    }
}
