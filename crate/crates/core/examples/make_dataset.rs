//! Builds, filters and splits a benchmark with scripted MT clients.

use std::collections::HashMap;

use aoa_simplify::dataset::{build_examples, filter_pairs, select_target_age, split, BuildOptions, TableMtClient};
use aoa_simplify::lexicon::{load_lexicon, LexiconFormat};

fn main() {
    let lex = load_lexicon(
        concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/aoa_sample.csv"),
        LexiconFormat::Csv,
    )
    .unwrap();
    let pairs = [
        (
            "The term is often used to mean a specific song on the album by number.",
            "This term is often used to denote certain songs on the album by numbers.",
        ),
        (
            "Its source, however, was first explored by non-native people in 1951, 453 years later.",
            "But its origin was first investigated by foreigners in 1951, 453 years later.",
        ),
        ("The song is on the album.", "The song is on the album."),
    ];
    let corpus: Vec<String> = pairs.iter().map(|p| p.0.to_owned()).collect();
    let fwd: HashMap<String, String> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| (p.0.into(), format!("ja-{i}")))
        .collect();
    let bwd: HashMap<String, String> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| (format!("ja-{i}"), p.1.into()))
        .collect();

    let built = build_examples(
        &corpus,
        &TableMtClient::new("en-ja", fwd),
        &TableMtClient::new("ja-en", bwd),
        &lex,
        &BuildOptions::default(),
    )
    .unwrap();
    for ex in &built.examples {
        println!("{} diff {:+.2}  {}", ex.id, ex.aoa_diff, ex.back_translation);
    }
    let kept = filter_pairs(&built.examples, 0.5);
    println!("kept after filter: {}", kept.len());
    println!("hard at 10: {}", select_target_age(&kept, 10.0).len());

    let pool: Vec<_> = (0..20)
        .map(|i| {
            let mut ex = built.examples[i % built.examples.len()].clone();
            ex.id = i;
            ex
        })
        .collect();
    let s = split(&pool, 42).unwrap();
    println!("train {} / dev {} / test {}", s.train.len(), s.dev.len(), s.test.len());
}
