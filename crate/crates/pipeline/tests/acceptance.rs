//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
//!
//! Every check uses the toy backends and an oracle written here, separately
//! from the implementation under test.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use retcap::backends::toy::{bundled_captions, ToyBackendConfig, ToyLmConfig, ToyParts};
use retcap::backends::{encode_video, lm_next_distribution, BackendSuite, DEFAULT_RETRIEVAL_FRAMES};
use retcap::decoder::{
    adamw_update, candidate_set, generate_caption, init_soft_prompt, pseudo_target_sentences,
    pseudo_target_vision, pseudo_target_words, AdamWConfig, CandidateSet, CaptionSession,
    DecodeConfig, LossWeights, PromptSet, SoftObjective, StepTargets, DEFAULT_INIT_NOISE,
};
use retcap::keyframes::{select_keyframes, KeyframeSet, DEFAULT_CLIP_THRESHOLD};
use retcap::metrics::{bleu4, cider, cider_items, rouge_l, EvalCorpus, EvalItem};
use retcap::retrieval::{build_index, retrieve, retrieve_context, CorpusIndex, LexiconTagger, RetrievalContext, WordCount};
use retcap::{EmbeddingVector, Frame};
use retcap_pipeline::ablation::AblationReport;
use retcap_pipeline::config::BackendConfig;
use retcap_pipeline::toy_data::write_toy_dataset;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const WORDS: &[&str] = &[
    "a", "man", "woman", "cat", "dog", "is", "cooking", "playing", "running", "the", "in", "on",
    "kitchen", "park", "guitar", "car", "red", "ball", "eats", "food", "street", "song",
];

fn random_text(rng: &mut impl Rng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn random_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn softmax_oracle(raw: &[f64], tau: f64) -> Vec<f64> {
    let m = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = raw.iter().map(|r| ((r - m) / tau).exp()).collect();
    let z: f64 = e.iter().sum();
    e.iter().map(|x| x / z).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

struct Toy {
    parts: ToyParts,
    suite: BackendSuite,
    index: CorpusIndex,
}

fn toy(cfg: &ToyBackendConfig) -> Toy {
    let parts = ToyParts::new(cfg);
    let suite = parts.suite();
    let corpus: Vec<String> = bundled_captions().iter().map(|s| s.to_string()).collect();
    let index = build_index(&corpus, suite.video.as_ref(), "bundled").unwrap();
    Toy { parts, suite, index }
}

impl Toy {
    fn prepare(&self, scenes: &[(&str, usize)], seed: u64) -> (RetrievalContext, KeyframeSet) {
        let frames = self.parts.synth_frames(scenes, 0.3, seed).unwrap();
        let v = encode_video(self.suite.video.as_ref(), &frames, DEFAULT_RETRIEVAL_FRAMES).unwrap();
        let ctx = retrieve_context(&v, &self.index, 15, 5, &LexiconTagger::default()).unwrap();
        let keys = select_keyframes(&frames, self.suite.image_text.as_ref(), DEFAULT_CLIP_THRESHOLD).unwrap();
        (ctx, keys)
    }
}

fn pseudo_targets() -> Outcome {
    let t = toy(&ToyBackendConfig::default());
    let text = t.suite.sentence.as_ref();
    let image = t.suite.image_text.as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    let start = Instant::now();
    for case in 0..100 {
        let n = rng.random_range(1..=100);
        let cands = CandidateSet {
            ids: (0..n as u32).collect(),
            base_probs: vec![1.0 / n as f64; n],
            texts: (0..n).map(|_| random_text(&mut rng, 1, 8)).collect(),
        };
        let tau = rng.random_range(0.05..1.0);
        let sentences: Vec<String> = (0..rng.random_range(1..=15)).map(|_| random_text(&mut rng, 3, 10)).collect();
        let words: Vec<String> = (0..rng.random_range(1..=5)).map(|_| random_text(&mut rng, 1, 1)).collect();
        let frames: Vec<Frame> = (0..rng.random_range(1..=6))
            .map(|_| Frame::from_features(random_vec(&mut rng, image.dim())))
            .collect();
        let embeddings: Vec<EmbeddingVector> = frames.iter().map(|f| image.embed_image(f).unwrap()).collect();
        let keys = KeyframeSet { indices: (0..frames.len()).collect(), frames, embeddings, threshold: 0.9 };

        let mean_sim = |refs: &[String]| -> Vec<f64> {
            cands
                .texts
                .iter()
                .map(|s| refs.iter().map(|r| text.similarity(r, s).unwrap()).sum::<f64>() / refs.len() as f64)
                .collect()
        };
        let vis: Vec<f64> = cands
            .texts
            .iter()
            .map(|s| keys.embeddings.iter().map(|f| image.score(f, s).unwrap()).sum::<f64>() / keys.len() as f64)
            .collect();
        let checks = [
            ("sentences", pseudo_target_sentences(&cands, &sentences, text, tau).unwrap(), softmax_oracle(&mean_sim(&sentences), tau)),
            ("words", pseudo_target_words(&cands, &words, text, tau).unwrap(), softmax_oracle(&mean_sim(&words), tau)),
            ("vision", pseudo_target_vision(&cands, &keys, image, tau).unwrap(), softmax_oracle(&vis, tau)),
        ];
        for (what, got, want) in checks {
            let d = max_abs_diff(&got, &want);
            worst = worst.max(d);
            ensure(d <= 1e-9, || format!("case {case} {what}: max |diff| {d:e}"))?;
        }
    }
    let secs = start.elapsed();
    ensure(secs < Duration::from_secs(10), || format!("took {secs:.1?}"))?;
    Ok(format!("300 cases, max |diff| {worst:.1e}, {secs:.1?}"))
}

/// Worst relative error of the analytic gradient over seeds 1..=3 at step `h`.
fn gradient_worst(t: &Toy, h: f64, soft: impl Fn(u64) -> Vec<Vec<f64>>) -> f64 {
    let lm = t.suite.lm.as_ref();
    let (ctx, keys) = t.prepare(&[("a cat is playing with a toy", 4), ("a dog runs in the park", 4)], 5);
    let mut worst = 0.0f64;
    for seed in 1u64..=3 {
        let soft = soft(seed);
        let scaffold = lm.encode("video showing");
        let generated = lm.encode(["a", "a cat", "a man is"][seed as usize - 1]);
        let tokens: Vec<u32> = scaffold.iter().chain(&generated).copied().collect();
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
        for r in 0..soft.len() {
            for c in 0..soft[r].len() {
                let mut plus = soft.clone();
                plus[r][c] += h;
                let mut minus = soft.clone();
                minus[r][c] -= h;
                let fd = (obj.evaluate(&plus).unwrap().total - obj.evaluate(&minus).unwrap().total) / (2.0 * h);
                let a = grad[r][c];
                worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-12));
            }
        }
    }
    worst
}

fn gradient() -> Outcome {
    let start = Instant::now();
    let cfg = ToyBackendConfig {
        lm: ToyLmConfig { embedding_scale: 1.0, ..Default::default() },
        ..Default::default()
    };
    let t = toy(&cfg);
    let d = t.suite.lm.embed_dim();
    let worst = gradient_worst(&t, 1e-4, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..5).map(|_| random_vec(&mut rng, d).iter().map(|x| 0.3 * x).collect()).collect()
    });
    let secs = start.elapsed();
    ensure(worst < 1e-4, || format!("worst relative error {worst:e}"))?;
    ensure(secs < Duration::from_secs(60), || format!("took {secs:.1?}"))?;
    Ok(format!("unit-scale toy LM, h=1e-4, 3 seeds x 160 coords, worst rel {worst:.1e}, {secs:.1?}"))
}

/// Not a criterion: the same check on the default (small-embedding) toy LM.
fn gradient_default_scale_info() -> String {
    let t = toy(&ToyBackendConfig::default());
    let lm = t.suite.lm.clone();
    let hard = PromptSet::new(vec!["Video showing".into()]).unwrap().get(0, lm.as_ref()).unwrap();
    let init = |seed| init_soft_prompt(&hard, 5, seed, lm.as_ref(), DEFAULT_INIT_NOISE).unwrap().embeddings;
    let e0 = lm.token_embedding(0).unwrap();
    let rms = (e0.iter().map(|x| x * x).sum::<f64>() / e0.len() as f64).sqrt();
    format!(
        "default toy LM (embedding rms {rms:.4}): worst rel {:.1e} at h=1e-4, {:.1e} at h={:.1e}",
        gradient_worst(&t, 1e-4, init),
        gradient_worst(&t, 1e-3 * rms, init),
        1e-3 * rms
    )
}

fn frozen_backbone() -> Outcome {
    let t = toy(&ToyBackendConfig::default());
    let (ctx, keys) = t.prepare(&[("a man is playing a guitar", 6), ("people are dancing at a party", 6)], 2);
    let before = t.suite.parameter_checksum();
    let r = generate_caption(&t.suite, &ctx, &keys, &DecodeConfig::default(), 7, None).map_err(|e| e.to_string())?;
    let after = t.suite.parameter_checksum();
    ensure(r.captions.len() == 16, || format!("{} captions", r.captions.len()))?;
    ensure(before == after, || format!("checksum {before:016x} -> {after:016x}"))?;
    Ok(format!("16 iterations, checksum {before:016x} unchanged"))
}

fn optimizer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let cfg = if case % 2 == 0 {
            AdamWConfig::default()
        } else {
            AdamWConfig {
                lr: rng.random_range(1e-5..1e-1),
                weight_decay: rng.random_range(0.0..1.0),
                beta1: rng.random_range(0.5..0.99),
                beta2: rng.random_range(0.9..0.9999),
                eps: 1e-8,
            }
        };
        let n = rng.random_range(1..64);
        let step: u64 = rng.random_range(1..30);
        let w0 = random_vec(&mut rng, n);
        let g = random_vec(&mut rng, n);
        let m0: Vec<f64> = random_vec(&mut rng, n).iter().map(|x| 0.1 * x).collect();
        let v0: Vec<f64> = (0..n).map(|_| 0.01 * rng.random::<f64>()).collect();
        let (mut w, mut m, mut v) = (w0.clone(), m0.clone(), v0.clone());
        adamw_update(&mut w, &g, &mut m, &mut v, step, &cfg);
        for i in 0..n {
            let decayed = w0[i] - cfg.lr * cfg.weight_decay * w0[i];
            let mi = cfg.beta1 * m0[i] + (1.0 - cfg.beta1) * g[i];
            let vi = cfg.beta2 * v0[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let mh = mi / (1.0 - cfg.beta1.powf(step as f64));
            let vh = vi / (1.0 - cfg.beta2.powf(step as f64));
            let wi = decayed - cfg.lr * mh / (vh.sqrt() + cfg.eps);
            let d = (w[i] - wi).abs();
            worst = worst.max(d);
            ensure(d <= 1e-10, || format!("case {case} coord {i}: {} vs {wi}", w[i]))?;
        }
    }
    Ok(format!("50 cases, max |diff| {worst:.1e}"))
}

fn keyframes() -> Outcome {
    let t = toy(&ToyBackendConfig::default());
    let scorer = t.suite.image_text.as_ref();
    let d = scorer.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for case in 0..100 {
        let len = rng.random_range(1..40);
        let mut cur = random_vec(&mut rng, d);
        let mut frames = Vec::new();
        for _ in 0..len {
            let step = rng.random_range(0.0..0.6);
            cur = cur.iter().map(|x| x + step * rng.sample::<f64, _>(StandardNormal)).collect();
            frames.push(Frame::from_features(cur.clone()));
        }
        let threshold = rng.random_range(0.5..1.0);
        // Sequential simulation: admit when the dot product with the anchor drops below λ.
        let embs: Vec<Vec<f64>> = frames.iter().map(|f| scorer.embed_image(f).unwrap().as_slice().to_vec()).collect();
        let mut expect = vec![0];
        let mut anchor = 0;
        for i in 1..embs.len() {
            let s: f64 = embs[i].iter().zip(&embs[anchor]).map(|(a, b)| a * b).sum();
            if s < threshold {
                expect.push(i);
                anchor = i;
            }
        }
        let got = select_keyframes(&frames, scorer, threshold).map_err(|e| e.to_string())?;
        ensure(got.indices == expect, || format!("case {case}: {:?} vs {expect:?}", got.indices))?;
    }
    let same = vec![Frame::from_features(random_vec(&mut rng, d)); 20];
    let got = select_keyframes(&same, scorer, 0.9).map_err(|e| e.to_string())?;
    ensure(got.indices == vec![0], || format!("identical frames gave {:?}", got.indices))?;
    Ok("100 sequences match; identical frames -> [0]".into())
}

fn retrieval() -> Outcome {
    let t = toy(&ToyBackendConfig::default());
    let enc = t.suite.video.as_ref();
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for case in 0..100 {
        let mut corpus: Vec<String> = (0..rng.random_range(1..60)).map(|_| random_text(&mut rng, 1, 8)).collect();
        if corpus.len() > 3 {
            corpus.push(corpus[2].clone());
        }
        let index = build_index(&corpus, enc, "random").unwrap();
        let video = EmbeddingVector::normalized(random_vec(&mut rng, enc.dim())).unwrap();
        let scores: Vec<f64> = corpus.iter().map(|s| video.dot(&enc.encode_text(s).unwrap())).collect();
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
        let k2 = rng.random_range(1..=corpus.len() + 3);
        let k1 = rng.random_range(1..=k2);
        let r2 = retrieve(&video, &index, k2).map_err(|e| e.to_string())?;
        let r1 = retrieve(&video, &index, k1).map_err(|e| e.to_string())?;
        let got: Vec<usize> = r2.iter().map(|s| s.index).collect();
        ensure(got == order[..k2.min(corpus.len())], || format!("case {case}: ranking differs"))?;
        ensure(r1[..] == r2[..r1.len()], || format!("case {case}: K={k1} is not a prefix of K={k2}"))?;
    }
    Ok("100 corpora match argsort; prefix property holds".into())
}

fn word_loss() -> Outcome {
    let t = toy(&ToyBackendConfig::default());
    let lm = t.suite.lm.as_ref();
    let cat = lm.encode("cat")[0];
    let (mut ctx, keys) = t.prepare(&[("a cat is playing with a toy", 6)], 1);
    ctx.words = vec![WordCount { word: "cat".into(), count: 3 }];
    let cfg = DecodeConfig::default();
    let off = LossWeights { words: 0.0, ..Default::default() };
    let hard = PromptSet::new(vec!["Video of".into()]).unwrap().get(0, lm).unwrap();
    let (mut compared, mut min_gain) = (0, f64::INFINITY);
    for seed in 0..10 {
        let mut with = CaptionSession::new(&t.suite, &ctx, &keys, &cfg, seed, None).map_err(|e| e.to_string())?;
        let mut state = with.begin(hard.clone()).map_err(|e| e.to_string())?;
        while !state.done {
            let mut without = with.clone();
            without.set_weights(off).map_err(|e| e.to_string())?;
            let mut twin = state.clone();
            let a = with.step(&mut state).map_err(|e| e.to_string())?;
            let b = without.step(&mut twin).map_err(|e| e.to_string())?;
            if a.candidates.position(cat).is_some() {
                let (qa, qb) = (a.updated.prob(cat), b.updated.prob(cat));
                ensure(qa > qb, || format!("seed {seed} step {}: q(cat) {qa:e} vs {qb:e}", state.step_index()))?;
                compared += 1;
                min_gain = min_gain.min(qa / qb);
            }
        }
    }
    ensure(compared > 0, || "cat never entered the candidate set".into())?;
    Ok(format!("{compared} paired steps over 10 seeds, min q ratio {min_gain:.6}"))
}

// pycocoevalcap 1.2 on the committed fixture after our tokenization.
const COCO_CIDER: f64 = 2.722123184572353;
const COCO_CIDER_ITEMS: [f64; 5] =
    [2.5721427277026083, 2.4467646601800266, 3.387712398024487, 2.2421493252736733, 2.961846811680971];

fn metric_golden() -> Outcome {
    let same = EvalCorpus::from_pairs([
        ("a", "a man is riding a horse on the beach".to_string(), vec!["a man is riding a horse on the beach".to_string()]),
        ("b", "two dogs are running in the snow".to_string(), vec!["two dogs are running in the snow".to_string()]),
    ])
    .map_err(|e| e.to_string())?;
    let (b, r) = (bleu4(&same).unwrap(), rouge_l(&same).unwrap());
    ensure(b == 1.0 && r == 1.0, || format!("identical corpus: B4 {b}, R {r}"))?;

    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/metrics5.json");
    let items: BTreeMap<String, EvalItem> =
        serde_json::from_slice(&std::fs::read(&fixture).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let corpus = EvalCorpus::new(items).map_err(|e| e.to_string())?;
    let c = cider(&corpus).unwrap();
    let per = cider_items(&corpus).unwrap();
    let d = per.iter().zip(COCO_CIDER_ITEMS).map(|(a, b)| (a - b).abs()).fold((c - COCO_CIDER).abs(), f64::max);
    ensure(d < 1e-4, || format!("CIDEr {c} vs {COCO_CIDER} (max diff {d:e})"))?;
    Ok(format!("B4 = R = 1 on identical corpus; CIDEr {c:.6} vs reference {COCO_CIDER:.6}"))
}

fn retcap_bin(args: &[&str]) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_retcap")).args(args).output().map_err(|e| e.to_string())?;
    ensure(o.status.success(), || format!("retcap {args:?} exited {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr)))
}

fn e2e_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = write_toy_dataset(&dir.path().join("data"), 3, 0, &BackendConfig::default()).map_err(|e| e.to_string())?;
    let m = manifest.to_str().unwrap();
    let mut times = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let start = Instant::now();
        retcap_bin(&["caption", "--manifest", m, "--seed", "42", "--workers", "1", "--out", out.to_str().unwrap()])?;
        times.push(start.elapsed());
    }
    let a = std::fs::read(dir.path().join("a/results.json")).map_err(|e| e.to_string())?;
    let b = std::fs::read(dir.path().join("b/results.json")).map_err(|e| e.to_string())?;
    ensure(a == b, || "results differ between runs".into())?;
    let slowest = times.iter().max().unwrap();
    ensure(*slowest < Duration::from_secs(120), || format!("a run took {slowest:.1?}"))?;
    Ok(format!("3 videos, {} identical bytes, slowest run {slowest:.1?}", a.len()))
}

fn ablation_shape() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let manifest = write_toy_dataset(&dir.path().join("data"), 3, 0, &BackendConfig::default()).map_err(|e| e.to_string())?;
    let out = dir.path().join("abl");
    retcap_bin(&["ablate", "--axis", "K", "--values", "5,10,15,20", "--manifest", manifest.to_str().unwrap(), "--out", out.to_str().unwrap()])?;
    let table = std::fs::read_to_string(out.join("ablation.md")).map_err(|e| e.to_string())?;
    let rows: Vec<&str> = table.lines().skip(2).filter(|l| l.starts_with('|')).collect();
    ensure(rows.len() == 4, || format!("table has {} rows:\n{table}", rows.len()))?;
    let report: AblationReport =
        serde_json::from_slice(&std::fs::read(out.join("ablation.json")).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let values: Vec<&str> = report.rows.iter().map(|r| r.value.as_str()).collect();
    ensure(values == ["5", "10", "15", "20"], || format!("values {values:?}"))?;
    let svg = std::fs::read_to_string(out.join("ablation.svg")).map_err(|e| e.to_string())?;
    ensure(svg.starts_with("<svg") && svg.contains("polyline"), || "plot is not a line chart".into())?;
    let cider: Vec<String> = report.rows.iter().map(|r| format!("{:.1}", 100.0 * r.metrics.cider)).collect();
    Ok(format!("4 rows (CIDEr x100: {}), plot {} bytes", cider.join(", "), svg.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("pseudo-target oracle equivalence", pseudo_targets),
        ("gradient correctness", gradient),
        ("frozen backbone", frozen_backbone),
        ("optimizer conformance", optimizer),
        ("keyframe simulation", keyframes),
        ("retrieval ranking", retrieval),
        ("word-loss effect fixture", word_loss),
        ("metric golden values", metric_golden),
        ("end-to-end determinism", e2e_determinism),
        ("ablation runner shape", ablation_shape),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{secs:.1}s]");
            }
        }
    }
    println!("INFO  gradient at default toy scale: {}", gradient_default_scale_info());
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
