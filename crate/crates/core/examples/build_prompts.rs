//! Prints the prompt each variant sends to the rewriter.

use aoa_simplify::rewriter::{build_prompt, PromptVariant, SimplifyRequest};

fn main() {
    let source = "この用語は、アルバム上の特定の曲を数字で表すためによく使用されます。";
    let translation = "This term is often used to denote certain songs on the album by numbers.";
    for variant in PromptVariant::ALL {
        let mut req = SimplifyRequest::new(variant, translation, 10.0);
        if variant.requires_source() {
            req = req.with_source(source);
        }
        if variant.takes_target_words() {
            req = req.with_targets(["denote"]);
        }
        println!("===== {} =====\n{}\n", variant.as_str(), build_prompt(&req).unwrap());
    }
}
