//! Runs the bundled experiment configs and prints a comparison table.

use aoa_simplify::harness::{compare_runs, run_experiment, ExperimentConfig};

fn main() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/experiments");
    let out = std::env::temp_dir().join("aoa-simplify-example-runs");
    let mut runs = Vec::new();
    for name in ["initial", "constrained", "proposed"] {
        let mut cfg = ExperimentConfig::load(format!("{dir}/{name}.toml").as_ref()).unwrap();
        cfg.output_dir = out.join(name);
        let art = run_experiment(&cfg).unwrap();
        println!(
            "{name}: success {:.2}, artifacts in {}",
            art.report.success_rate,
            cfg.output_dir.display()
        );
        runs.push(art);
    }
    println!("\n{}", compare_runs(&runs).unwrap().to_text());
}
