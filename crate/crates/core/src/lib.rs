//! Age-of-acquisition (AoA) driven simplification of machine-translation
//! output.
//!
//! The crate rewrites translations so that their hardest word is acquired
//! before a target age. A [`lexicon::AoaLexicon`] rates words, [`textproc`]
//! finds the hardest one, [`rewriter`] asks a language model to replace it and
//! [`controller`] repeats until the sentence is simple enough. Around that
//! loop sit the benchmark builder ([`dataset`]), a constrained beam-search
//! baseline ([`constrained`]), the metric suite ([`metrics`]), an experiment
//! runner ([`harness`]), an HTTP API ([`service`]) and the command line
//! front end ([`cli`]).
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod cli;
pub mod constrained;
pub mod controller;
pub mod dataset;
pub mod harness;
pub mod lexicon;
pub mod metrics;
pub mod rewriter;
pub mod service;
pub mod textproc;
