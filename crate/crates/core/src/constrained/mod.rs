//! Beam search with a hard AoA constraint.
//!
//! Any hypothesis that gains a word rated at or above the threshold is
//! dropped on the spot (its score would be −∞). When no hypothesis reaches
//! end-of-sequence within `max_len` tokens the search returns `None` and the
//! caller falls back to the unconstrained output.

mod ngram;

use std::cmp::Ordering;

use serde::Serialize;

pub use ngram::{BigramTable, NgramModel};

use crate::lexicon::AoaLexicon;

/// Next-token distribution over a fixed vocabulary.
pub trait TokenModel: Send + Sync {
    fn vocabulary(&self) -> &[String];

    /// Log-probabilities for every vocabulary id followed by end-of-sequence
    /// (so the result has `vocabulary().len() + 1` entries). `-inf` marks an
    /// impossible continuation.
    fn log_probs(&self, prefix: &[usize]) -> Vec<f64>;
}

/// Decides whether a token is forbidden.
pub trait TokenConstraint {
    fn violates(&self, token: &str) -> bool;
}

impl<F: Fn(&str) -> bool> TokenConstraint for F {
    fn violates(&self, token: &str) -> bool {
        self(token)
    }
}

/// Allows everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unconstrained;

impl TokenConstraint for Unconstrained {
    fn violates(&self, _token: &str) -> bool {
        false
    }
}

/// Forbids rated words with AoA at or above `threshold`; unrated tokens pass.
#[derive(Debug, Clone, Copy)]
pub struct AoaConstraint<'a> {
    lexicon: &'a AoaLexicon,
    threshold: f64,
}

impl TokenConstraint for AoaConstraint<'_> {
    fn violates(&self, token: &str) -> bool {
        self.lexicon.lookup(token).is_some_and(|a| a >= self.threshold)
    }
}

pub fn aoa_constraint(lexicon: &AoaLexicon, threshold: f64) -> AoaConstraint<'_> {
    debug_assert!(threshold > 0.0);
    AoaConstraint { lexicon, threshold }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamHypothesis {
    pub tokens: Vec<String>,
    pub log_score: f64,
    pub alive: bool,
}

#[derive(Debug, Clone)]
struct Candidate {
    ids: Vec<usize>,
    score: f64,
    finished: bool,
}

fn cmp_ids(a: &[usize], b: &[usize], vocab: &[String]) -> Ordering {
    a.iter()
        .map(|&i| vocab[i].as_str())
        .cmp(b.iter().map(|&i| vocab[i].as_str()))
}

/// Higher score first; equal scores fall back to lexicographic token order.
fn rank(a: &Candidate, b: &Candidate, vocab: &[String]) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| cmp_ids(&a.ids, &b.ids, vocab))
        .then_with(|| b.finished.cmp(&a.finished))
}

/// Length-capped beam search by summed log-probability. Finished
/// hypotheses contain at most `max_len` tokens before end-of-sequence.
pub fn constrained_beam_search(
    model: &dyn TokenModel,
    constraint: &dyn TokenConstraint,
    beam_size: usize,
    max_len: usize,
) -> Option<BeamHypothesis> {
    assert!(beam_size >= 1 && max_len >= 1, "beam_size and max_len must be positive");
    let vocab = model.vocabulary();
    let eos = vocab.len();
    let banned: Vec<bool> = vocab.iter().map(|t| constraint.violates(t)).collect();

    let mut beams = vec![Candidate {
        ids: Vec::new(),
        score: 0.0,
        finished: false,
    }];
    let mut best: Option<Candidate> = None;

    while !beams.is_empty() {
        let mut pool = Vec::new();
        for hyp in &beams {
            let lps = model.log_probs(&hyp.ids);
            debug_assert_eq!(lps.len(), eos + 1);
            if lps[eos] > f64::NEG_INFINITY {
                pool.push(Candidate {
                    ids: hyp.ids.clone(),
                    score: hyp.score + lps[eos],
                    finished: true,
                });
            }
            if hyp.ids.len() >= max_len {
                continue;
            }
            for (tok, &lp) in lps[..eos].iter().enumerate() {
                if banned[tok] || lp == f64::NEG_INFINITY || lp.is_nan() {
                    continue;
                }
                let mut ids = hyp.ids.clone();
                ids.push(tok);
                pool.push(Candidate {
                    ids,
                    score: hyp.score + lp,
                    finished: false,
                });
            }
        }
        pool.sort_by(|a, b| rank(a, b, vocab));
        pool.truncate(beam_size);
        beams = Vec::with_capacity(pool.len());
        for cand in pool {
            if cand.finished {
                if best.as_ref().is_none_or(|b| rank(&cand, b, vocab) == Ordering::Less) {
                    best = Some(cand);
                }
            } else {
                beams.push(cand);
            }
        }
    }

    best.map(|c| BeamHypothesis {
        tokens: c.ids.iter().map(|&i| vocab[i].clone()).collect(),
        log_score: c.score,
        alive: true,
    })
}

/// Plain beam search with no constraint.
pub fn beam_search(model: &dyn TokenModel, beam_size: usize, max_len: usize) -> Option<BeamHypothesis> {
    constrained_beam_search(model, &Unconstrained, beam_size, max_len)
}

/// Joins tokens with spaces, attaching closing punctuation to the left.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    let mut out = String::new();
    for tok in tokens {
        let tok = tok.as_ref();
        let closing = tok
            .chars()
            .all(|c| matches!(c, '.' | ',' | ';' | ':' | '!' | '?' | ')' | '%'));
        if !out.is_empty() && !closing {
            out.push(' ');
        }
        out.push_str(tok);
    }
    out
}

/// Result of a constrained decode with fallback.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstrainedOutput {
    pub sentence: String,
    pub fallback_used: bool,
    pub log_score: Option<f64>,
}

/// Runs the constrained search; if it fails, returns `fallback` (the
/// unconstrained translation) instead.
pub fn decode_or_fallback(
    model: &dyn TokenModel,
    constraint: &dyn TokenConstraint,
    beam_size: usize,
    max_len: usize,
    fallback: &str,
) -> ConstrainedOutput {
    match constrained_beam_search(model, constraint, beam_size, max_len) {
        Some(h) => ConstrainedOutput {
            sentence: detokenize(&h.tokens),
            fallback_used: false,
            log_score: Some(h.log_score),
        },
        None => ConstrainedOutput {
            sentence: fallback.to_owned(),
            fallback_used: true,
            log_score: None,
        },
    }
}
