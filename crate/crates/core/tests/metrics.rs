//! Metric values against frozen reference-scorer outputs and hand counts.

use std::collections::BTreeMap;

use retcap::metrics::{bleu4, cider, cider_items, evaluate, rouge_l, EvalCorpus, EvalItem};

fn fixture() -> EvalCorpus {
    let raw = include_str!("fixtures/metrics5.json");
    let items: BTreeMap<String, EvalItem> = serde_json::from_str(raw).unwrap();
    EvalCorpus::new(items).unwrap()
}

// Produced by pycocoevalcap 1.2 on the fixture after our tokenization.
const COCO_CIDER: f64 = 2.722123184572353;
const COCO_CIDER_ITEMS: [f64; 5] = [
    2.5721427277026083,
    2.4467646601800266,
    3.387712398024487,
    2.2421493252736733,
    2.961846811680971,
];
const COCO_BLEU4: f64 = 0.529085970789339;
const COCO_ROUGE_L: f64 = 0.8081373602072407;

#[test]
fn cider_matches_reference_scorer() {
    let c = fixture();
    assert!((cider(&c).unwrap() - COCO_CIDER).abs() < 1e-4);
    for (got, want) in cider_items(&c).unwrap().iter().zip(COCO_CIDER_ITEMS) {
        assert!((got - want).abs() < 1e-4, "{got} vs {want}");
    }
}

#[test]
fn bleu_and_rouge_match_reference_scorer() {
    let c = fixture();
    // The reference scorer adds tiny epsilons to the precisions.
    assert!((bleu4(&c).unwrap() - COCO_BLEU4).abs() < 1e-6);
    assert!((rouge_l(&c).unwrap() - COCO_ROUGE_L).abs() < 1e-9);
}

#[test]
fn identical_corpus_scores_one() {
    let c = EvalCorpus::from_pairs([
        ("a", "a man is riding a horse on the beach".to_string(), vec!["a man is riding a horse on the beach".to_string()]),
        ("b", "two dogs are running in the snow".to_string(), vec!["two dogs are running in the snow".to_string()]),
    ])
    .unwrap();
    let r = evaluate(&c).unwrap();
    assert!((r.bleu4 - 1.0).abs() < 1e-12);
    assert!((r.rouge_l - 1.0).abs() < 1e-12);
    assert!(r.meteor.is_none());
}

#[test]
fn disjoint_items_give_cider_ten() {
    // Each n-gram occurs in one of two reference sets, so idf = ln 2 everywhere
    // and an exact copy scores cos = 1 at every order.
    let c = EvalCorpus::from_pairs([
        ("a", "red apples grow on trees".to_string(), vec!["red apples grow on trees".to_string()]),
        ("b", "blue boats sail over water".to_string(), vec!["blue boats sail over water".to_string()]),
    ])
    .unwrap();
    for s in cider_items(&c).unwrap() {
        assert!((s - 10.0).abs() < 1e-12, "{s}");
    }
}

#[test]
fn bleu_hand_count() {
    // Candidate lengths 6, 4, 5 (c = 15); closest reference lengths 6, 4, 6 (r = 16).
    // Clipped matches per order: 1-gram 6+3+5, 2-gram 5+2+3, 3-gram 4+1+1, 4-gram 3+0+0.
    let c = EvalCorpus::from_pairs([
        ("1", "the cat sat on the mat".to_string(), vec!["the cat sat on the mat".to_string()]),
        ("2", "a dog ran fast".to_string(), vec!["a dog ran away".to_string()]),
        ("3", "birds fly over the sea".to_string(), vec!["birds fly high over the sea".to_string()]),
    ])
    .unwrap();
    let p = [14.0 / 15.0, 10.0 / 12.0, 6.0 / 9.0, 3.0 / 6.0];
    let geo = (p.iter().map(|x: &f64| x.ln()).sum::<f64>() / 4.0).exp();
    let bp = (1.0 - 16.0 / 15.0f64).exp();
    assert!((bleu4(&c).unwrap() - bp * geo).abs() < 1e-12);
}

#[test]
fn zero_four_gram_precision_gives_zero_bleu() {
    let c = EvalCorpus::from_pairs([("1", "a dog ran".to_string(), vec!["a dog ran away".to_string()])]).unwrap();
    assert_eq!(bleu4(&c).unwrap(), 0.0);
}
