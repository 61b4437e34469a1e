//! Finds the hardest word of a sentence.
//!
//! cargo run --example analyze_sentence -- "Some sentence to rate."

use aoa_simplify::lexicon::{load_lexicon, LexiconFormat};
use aoa_simplify::textproc::annotate;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/aoa_sample.csv");
    let lex = load_lexicon(path, LexiconFormat::Csv).expect("lexicon");
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "This term is often used to denote certain songs on the album by numbers.".into());

    let analyzed = annotate(&lex, &text);
    for tok in &analyzed.tokens {
        match tok.aoa {
            Some(aoa) => println!("{:<12} {aoa:>6.2}", tok.surface),
            None => println!("{:<12}      -", tok.surface),
        }
    }
    match analyzed.max_token() {
        Some(t) => println!(
            "hardest: {} ({:?}), below 10: {}",
            t.surface,
            t.aoa,
            analyzed.is_below(10.0)
        ),
        None => println!("no rated words"),
    }
}
