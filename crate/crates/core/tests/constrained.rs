mod common;

use aoa_simplify::constrained::{
    aoa_constraint, beam_search, constrained_beam_search, decode_or_fallback, BigramTable, NgramModel, TokenModel,
    Unconstrained,
};
use aoa_simplify::lexicon::AoaLexicon;
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn banned_set<R: Rng>(rng: &mut R, v: usize) -> Vec<String> {
    (0..v).filter(|_| rng.gen_bool(0.3)).map(|i| format!("t{i}")).collect()
}

#[test]
fn beam_as_wide_as_the_space_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let v = rng.gen_range(1..=5);
        let max_len = rng.gen_range(1..=5);
        let model = random_bigram(&mut rng, v);
        let banned = banned_set(&mut rng, v);
        let constraint = |t: &str| banned.iter().any(|b| b == t);
        let beam = sequence_count(v, max_len);
        let got = constrained_beam_search(&model, &constraint, beam, max_len);
        let want = exhaustive_best(&model, &constraint, max_len);
        match (got, want) {
            (None, None) => {}
            (Some(h), Some((toks, score))) => {
                assert_eq!(h.tokens, toks);
                assert_eq!(h.log_score, score);
                assert!(h.tokens.len() <= max_len);
                assert!(h.tokens.iter().all(|t| !banned.contains(t)));
            }
            (g, w) => panic!("beam {g:?} vs exhaustive {w:?}"),
        }
    }
}

#[test]
fn all_paths_blocked_falls_back() {
    // Start row only allows t0, which is banned; no immediate end.
    let ninf = f64::NEG_INFINITY;
    let model = BigramTable::new(
        vec!["t0".into(), "t1".into()],
        vec![vec![ninf, 0.0, ninf], vec![ninf, ninf, 0.0], vec![0.0, ninf, ninf]],
    );
    let ban_t0 = |t: &str| t == "t0";
    assert!(constrained_beam_search(&model, &ban_t0, 8, 4).is_none());
    let out = decode_or_fallback(&model, &ban_t0, 8, 4, "plain output");
    assert!(out.fallback_used);
    assert_eq!(out.sentence, "plain output");
    assert_eq!(out.log_score, None);

    let free = decode_or_fallback(&model, &Unconstrained, 8, 4, "plain output");
    assert!(!free.fallback_used);
    assert_eq!(free.sentence, "t0 t1");
}

#[test]
fn ngram_model_rows_are_distributions() {
    let model = NgramModel::train(2, 0.5, ["the cat sat .", "the dog sat on the mat ."]);
    let v = model.vocabulary().len();
    for prefix in [
        vec![],
        vec![model.token_id("the").unwrap()],
        vec![model.token_id("mat").unwrap()],
    ] {
        let lps = model.log_probs(&prefix);
        assert_eq!(lps.len(), v + 1);
        let sum: f64 = lps.iter().map(|l| l.exp()).sum();
        assert!((sum - 1.0).abs() < 1e-12, "{sum}");
    }
}

#[test]
fn aoa_constraint_replaces_the_hard_word() {
    let lex = AoaLexicon::from_pairs("t", [("denote", 11.24), ("describe", 7.0), ("term", 8.28)]);
    let lines = [
        "the term is used to denote songs .",
        "the term is used to denote songs .",
        "the term is used to describe songs .",
    ];
    let model = NgramModel::train(2, 0.0, lines);
    let free = beam_search(&model, 4, 12).unwrap();
    assert!(free.tokens.contains(&"denote".to_owned()));
    let out = decode_or_fallback(&model, &aoa_constraint(&lex, 10.0), 4, 12, "unused");
    assert!(!out.fallback_used);
    assert_eq!(out.sentence, "the term is used to describe songs.");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Narrow beams may miss the optimum but never emit a banned token,
    /// never beat the exhaustive score and never exceed the length cap.
    #[test]
    fn narrow_beam_is_sound(seed in any::<u64>(), beam in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = rng.gen_range(1..=6);
        let max_len = rng.gen_range(1..=5);
        let model = random_bigram(&mut rng, v);
        let banned = banned_set(&mut rng, v);
        let constraint = |t: &str| banned.iter().any(|b| b == t);
        let best = exhaustive_best(&model, &constraint, max_len);
        if let Some(h) = constrained_beam_search(&model, &constraint, beam, max_len) {
            prop_assert!(h.tokens.len() <= max_len);
            prop_assert!(h.tokens.iter().all(|t| !banned.contains(t)));
            let (_, s) = best.expect("beam found a legal sequence");
            prop_assert!(h.log_score <= s);
        }
    }
}
