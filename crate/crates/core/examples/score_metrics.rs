//! Scores a toy system output with every metric.

use aoa_simplify::lexicon::{load_lexicon, LexiconFormat};
use aoa_simplify::metrics::{bleu, evaluate, fkgl, sari, EvalCorpus, FamiliarWords, MetricContext};

fn main() {
    let lex = load_lexicon(
        concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/aoa_sample.csv"),
        LexiconFormat::Csv,
    )
    .unwrap();
    let familiar = FamiliarWords::bundled();

    let inputs = vec!["This term is often used to denote certain songs on the album by numbers.".to_owned()];
    let outputs = vec!["The term is often used to describe certain songs on a given album by numbers.".to_owned()];
    let refs = vec!["The term is often used to mean a specific song on the album by number.".to_owned()];

    println!("BLEU  {:.2}", bleu(&outputs, &refs).unwrap());
    println!(
        "SARI  {:.2}",
        sari(&inputs, &outputs, &[vec![refs[0].as_str()]]).unwrap()
    );
    println!("FKGL  {:.2}", fkgl(&["The cat sat on the mat."]).unwrap());

    let ctx = MetricContext {
        lexicon: &lex,
        familiar: &familiar,
        target_age: 10.0,
        comet: None,
    };
    let corpus = EvalCorpus {
        sources: &inputs,
        inputs: &inputs,
        hypotheses: &outputs,
        references: &refs,
    };
    let report = evaluate(&ctx, &corpus).unwrap();
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
}
