//! Corpus-level BLEU-4 without smoothing.
//!
//! Both sides are tokenized with [`crate::textproc::tokenize`]. Precision is
//! averaged over the orders for which the hypotheses contain at least one
//! n-gram, so short corpora still score 100 against themselves; an order with
//! candidate n-grams but zero matches makes the whole score 0.

use std::collections::HashMap;

use super::{check_pairs, MetricError, MAX_ORDER};
use crate::textproc::tokenize;

/// Sufficient statistics for corpus BLEU. Partial stats from disjoint
/// sentence subsets combine with [`BleuStats::merge`] in any order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

pub(crate) fn surfaces(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.surface).collect()
}

pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

impl BleuStats {
    pub fn from_pair(hypothesis: &str, reference: &str) -> Self {
        let hyp = surfaces(hypothesis);
        let rf = surfaces(reference);
        let mut stats = BleuStats {
            hyp_len: hyp.len() as u64,
            ref_len: rf.len() as u64,
            ..Default::default()
        };
        for n in 1..=MAX_ORDER {
            let hyp_counts = ngram_counts(&hyp, n);
            let ref_counts = ngram_counts(&rf, n);
            stats.totals[n - 1] = hyp_counts.values().sum();
            stats.matches[n - 1] = hyp_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    pub fn merge(mut self, other: &Self) -> Self {
        for n in 0..MAX_ORDER {
            self.matches[n] += other.matches[n];
            self.totals[n] += other.totals[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
        self
    }

    /// Modified n-gram precision of order `n` (1-based); 0 when there are no
    /// candidate n-grams.
    pub fn precision(&self, n: usize) -> f64 {
        let total = self.totals[n - 1];
        if total == 0 {
            0.0
        } else {
            self.matches[n - 1] as f64 / total as f64
        }
    }

    pub fn brevity_penalty(&self) -> f64 {
        if self.hyp_len == 0 {
            0.0
        } else if self.hyp_len < self.ref_len {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        } else {
            1.0
        }
    }

    /// BLEU on a 0–100 scale.
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        let mut orders = 0usize;
        for n in 1..=MAX_ORDER {
            if self.totals[n - 1] == 0 {
                continue;
            }
            if self.matches[n - 1] == 0 {
                return 0.0;
            }
            log_sum += self.precision(n).ln();
            orders += 1;
        }
        if orders == 0 {
            return 0.0;
        }
        100.0 * self.brevity_penalty() * (log_sum / orders as f64).exp()
    }
}

pub fn bleu_stats<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R]) -> Result<BleuStats, MetricError> {
    check_pairs(hypotheses.len(), references.len())?;
    Ok(hypotheses
        .iter()
        .zip(references)
        .map(|(h, r)| BleuStats::from_pair(h.as_ref(), r.as_ref()))
        .fold(BleuStats::default(), |acc, s| acc.merge(&s)))
}

/// Corpus BLEU-4 of `hypotheses` against one reference each, on 0–100.
pub fn bleu<H: AsRef<str>, R: AsRef<str>>(hypotheses: &[H], references: &[R]) -> Result<f64, MetricError> {
    Ok(bleu_stats(hypotheses, references)?.score())
}
