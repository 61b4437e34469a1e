//! Decodes from a small n-gram model while banning words above an age.

use aoa_simplify::constrained::{aoa_constraint, beam_search, decode_or_fallback, detokenize, NgramModel};
use aoa_simplify::lexicon::{load_lexicon, LexiconFormat};

fn main() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let lex = load_lexicon(format!("{dir}/fixtures/aoa_sample.csv"), LexiconFormat::Csv).unwrap();
    let lines = [
        "The term is used to denote certain songs .",
        "The term is used to describe certain songs .",
        "The term is used to denote songs .",
    ];
    let model = NgramModel::train(2, 0.0, lines);

    if let Some(h) = beam_search(&model, 4, 12) {
        println!("unconstrained: {} ({:.3})", detokenize(&h.tokens), h.log_score);
    }
    let banned = aoa_constraint(&lex, 10.0);
    let out = decode_or_fallback(&model, &banned, 4, 12, lines[0]);
    println!("constrained:   {} (fallback: {})", out.sentence, out.fallback_used);

    let strict = aoa_constraint(&lex, 5.0);
    let out = decode_or_fallback(&model, &strict, 4, 12, lines[0]);
    println!("too strict:    {} (fallback: {})", out.sentence, out.fallback_used);
}
