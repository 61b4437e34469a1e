//! Runs the rewrite loop against a mock backend that replays canned outputs.

use std::collections::BTreeMap;

use aoa_simplify::controller::{simplify, SimplifyOptions};
use aoa_simplify::harness::BackendConfig;
use aoa_simplify::lexicon::{load_lexicon, LexiconFormat};
use serde::Deserialize;

#[derive(Deserialize)]
struct MockTable {
    substitutions: BTreeMap<String, String>,
    sentences: BTreeMap<String, String>,
}

fn main() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let lex = load_lexicon(format!("{dir}/fixtures/aoa_sample.csv"), LexiconFormat::Csv).expect("lexicon");
    let table: MockTable =
        toml::from_str(&std::fs::read_to_string(format!("{dir}/fixtures/worked_mock.toml")).unwrap()).unwrap();
    let backend = BackendConfig::Mock {
        substitutions: table.substitutions,
        sentences: table.sentences,
    }
    .build();

    let source = "この用語は、アルバム上の特定の曲を数字で表すためによく使用されます。";
    let translation = "This term is often used to denote certain songs on the album by numbers.";
    let res = simplify(
        translation,
        Some(source),
        &lex,
        backend.as_ref(),
        &SimplifyOptions::default(),
    )
    .unwrap();

    for it in &res.iterations {
        println!(
            "#{} {:?}: {:?} -> {:?}\n   {}",
            it.index, it.target_words, it.max_aoa_before, it.max_aoa_after, it.output_sentence
        );
    }
    println!("stop: {:?}, success: {}", res.stop_reason, res.success);
}
