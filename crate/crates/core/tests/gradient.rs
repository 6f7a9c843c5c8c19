//! Analytic soft-prompt gradient vs central finite differences on the toy LM.

mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use retcap::backends::lm_next_distribution;
use retcap::backends::toy::{ToyBackendConfig, ToyLmConfig};
use retcap::decoder::{
    candidate_set, init_soft_prompt, pseudo_target_sentences, pseudo_target_vision,
    pseudo_target_words, LossWeights, PromptSet, SoftObjective, StepTargets, DEFAULT_INIT_NOISE,
};

/// Guards 0/0 only; every coordinate here is judged on relative error.
pub const REL_FLOOR: f64 = 1e-12;

fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(REL_FLOOR)
}

/// Checks every coordinate for seeds 1..=3 and returns the worst relative error.
fn check(t: &common::Toy, h: f64, soft: impl Fn(u64) -> Vec<Vec<f64>>) -> f64 {
    let lm = t.suite.lm.as_ref();
    let frames = t.frames(&[("a cat is playing with a toy", 4), ("a dog runs in the park", 4)], 5);
    let (ctx, keys) = t.prepare(&frames, 15, 5);
    let mut overall = 0.0f64;

    for seed in [1u64, 2, 3] {
        let soft = soft(seed);
        let scaffold = lm.encode("video showing");
        let generated = lm.encode(["a", "a cat", "a man is"][seed as usize - 1]);
        let mut tokens = scaffold.clone();
        tokens.extend_from_slice(&generated);

        let cands = candidate_set(lm, &soft, &scaffold, &generated, 100).unwrap();
        let targets = StepTargets {
            candidates: cands.ids.clone(),
            sentences: Some(pseudo_target_sentences(&cands, &ctx.sentence_texts(), t.suite.sentence.as_ref(), 0.1).unwrap()),
            words: Some(pseudo_target_words(&cands, &ctx.word_texts(), t.suite.sentence.as_ref(), 0.1).unwrap()),
            vision: Some(pseudo_target_vision(&cands, &keys, t.suite.image_text.as_ref(), 0.1).unwrap()),
            plain: Some(lm_next_distribution(lm, &[], &tokens).unwrap().probs().to_vec()),
        };
        let obj = SoftObjective { lm, tokens: &tokens, targets: &targets, weights: LossWeights::default() };
        let (_, grad) = obj.gradient(&soft).unwrap();

        let mut worst = 0.0f64;
        for r in 0..soft.len() {
            for c in 0..soft[r].len() {
                let mut plus = soft.clone();
                plus[r][c] += h;
                let mut minus = soft.clone();
                minus[r][c] -= h;
                let fd = (obj.evaluate(&plus).unwrap().total - obj.evaluate(&minus).unwrap().total) / (2.0 * h);
                let e = rel_err(grad[r][c], fd);
                worst = worst.max(e);
                assert!(e < 1e-4, "seed {seed} [{r}][{c}]: analytic {} vs fd {fd} (rel {e:e})", grad[r][c]);
            }
        }
        println!("seed {seed}: worst relative error {worst:e}");
        overall = overall.max(worst);
    }
    overall
}

/// Unit-size embeddings, large random prompts, h = 1e-4.
#[test]
fn total_loss_gradient_matches_central_differences() {
    let cfg = ToyBackendConfig {
        lm: ToyLmConfig { embedding_scale: 1.0, ..Default::default() },
        ..Default::default()
    };
    let t = common::toy_with(&cfg);
    let d = t.suite.lm.embed_dim();
    check(&t, 1e-4, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..5)
            .map(|_| (0..d).map(|_| 0.3 * rng.sample::<f64, _>(StandardNormal)).collect())
            .collect()
    });
}

/// Default toy LM with prompts as the decoder initializes them. Its embeddings
/// are small, so h shrinks with them.
#[test]
fn gradient_holds_at_default_embedding_scale() {
    let t = common::toy();
    let lm = t.suite.lm.clone();
    let e0 = lm.token_embedding(0).unwrap();
    let rms = (e0.iter().map(|x| x * x).sum::<f64>() / e0.len() as f64).sqrt();
    let hard = PromptSet::new(vec!["Video showing".into()]).unwrap().get(0, lm.as_ref()).unwrap();
    check(&t, 1e-3 * rms, |seed| {
        init_soft_prompt(&hard, 5, seed, lm.as_ref(), DEFAULT_INIT_NOISE).unwrap().embeddings
    });
}
