//! Corpus SARI (Xu et al. 2016) with micro-averaged n-gram statistics.
//!
//! For each order 1..=4 the add, keep and delete operation counts are summed
//! over the corpus before ratios are taken. Add and keep contribute F1, delete
//! contributes precision. Source and system n-gram counts are scaled by the
//! number of references, as in the reference implementation. Any 0/0 ratio is 0.

use std::collections::{HashMap, HashSet};

use super::bleu::{ngram_counts, surfaces};
use super::{MetricError, MAX_ORDER};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub correct: u64,
    pub sys_total: u64,
    pub ref_total: u64,
}

impl OpCounts {
    fn add(&mut self, other: &OpCounts) {
        self.correct += other.correct;
        self.sys_total += other.sys_total;
        self.ref_total += other.ref_total;
    }

    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.sys_total)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.ref_total)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p > 0.0 || r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-order operation counts; mergeable across sentence partitions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SariStats {
    pub add: [OpCounts; MAX_ORDER],
    pub keep: [OpCounts; MAX_ORDER],
    pub delete: [OpCounts; MAX_ORDER],
}

/// The three averaged components, each on 0–1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SariComponents {
    pub add: f64,
    pub keep: f64,
    pub delete: f64,
}

fn scaled<'a>(counts: &HashMap<&'a [String], u64>, k: u64) -> HashMap<&'a [String], u64> {
    counts.iter().map(|(&g, &c)| (g, c * k)).collect()
}

fn intersect<'a>(a: &HashMap<&'a [String], u64>, b: &HashMap<&'a [String], u64>) -> HashMap<&'a [String], u64> {
    a.iter()
        .filter_map(|(&g, &c)| b.get(g).map(|&d| (g, c.min(d))))
        .filter(|&(_, c)| c > 0)
        .collect()
}

fn subtract<'a>(a: &HashMap<&'a [String], u64>, b: &HashMap<&'a [String], u64>) -> HashMap<&'a [String], u64> {
    a.iter()
        .filter_map(|(&g, &c)| {
            let rest = c.saturating_sub(b.get(g).copied().unwrap_or(0));
            (rest > 0).then_some((g, rest))
        })
        .collect()
}

fn total(a: &HashMap<&[String], u64>) -> u64 {
    a.values().sum()
}

impl SariStats {
    pub fn from_triple<R: AsRef<str>>(source: &str, hypothesis: &str, references: &[R]) -> Result<Self, MetricError> {
        if references.is_empty() {
            return Err(MetricError::EmptyReferences);
        }
        let src = surfaces(source);
        let sys = surfaces(hypothesis);
        let refs: Vec<Vec<String>> = references.iter().map(|r| surfaces(r.as_ref())).collect();
        let num_refs = refs.len() as u64;
        let mut stats = SariStats::default();
        for n in 1..=MAX_ORDER {
            let src_c = ngram_counts(&src, n);
            let sys_c = ngram_counts(&sys, n);
            let mut ref_c: HashMap<&[String], u64> = HashMap::new();
            for r in &refs {
                for (g, c) in ngram_counts(r, n) {
                    *ref_c.entry(g).or_insert(0) += c;
                }
            }

            let src_set: HashSet<_> = src_c.keys().copied().collect();
            let sys_set: HashSet<_> = sys_c.keys().copied().collect();
            let ref_set: HashSet<_> = ref_c.keys().copied().collect();
            let added: HashSet<_> = sys_set.difference(&src_set).copied().collect();
            stats.add[n - 1] = OpCounts {
                correct: added.intersection(&ref_set).count() as u64,
                sys_total: added.len() as u64,
                ref_total: ref_set.difference(&src_set).count() as u64,
            };

            let src_rep = scaled(&src_c, num_refs);
            let sys_rep = scaled(&sys_c, num_refs);
            let src_and_sys = intersect(&src_rep, &sys_rep);
            let src_and_ref = intersect(&src_rep, &ref_c);
            stats.keep[n - 1] = OpCounts {
                correct: total(&intersect(&src_and_sys, &src_and_ref)),
                sys_total: total(&src_and_sys),
                ref_total: total(&src_and_ref),
            };

            let src_not_sys = subtract(&src_rep, &sys_rep);
            let src_not_ref = subtract(&src_rep, &ref_c);
            stats.delete[n - 1] = OpCounts {
                correct: total(&intersect(&src_not_sys, &src_not_ref)),
                sys_total: total(&src_not_sys),
                ref_total: total(&src_not_ref),
            };
        }
        Ok(stats)
    }

    pub fn merge(mut self, other: &Self) -> Self {
        for n in 0..MAX_ORDER {
            self.add[n].add(&other.add[n]);
            self.keep[n].add(&other.keep[n]);
            self.delete[n].add(&other.delete[n]);
        }
        self
    }

    pub fn components(&self) -> SariComponents {
        let k = MAX_ORDER as f64;
        SariComponents {
            add: self.add.iter().map(OpCounts::f1).sum::<f64>() / k,
            keep: self.keep.iter().map(OpCounts::f1).sum::<f64>() / k,
            delete: self.delete.iter().map(OpCounts::precision).sum::<f64>() / k,
        }
    }

    /// SARI on 0–100.
    pub fn score(&self) -> f64 {
        let c = self.components();
        100.0 * (c.add + c.keep + c.delete) / 3.0
    }
}

pub fn sari_stats<S, H, R>(sources: &[S], hypotheses: &[H], references: &[Vec<R>]) -> Result<SariStats, MetricError>
where
    S: AsRef<str>,
    H: AsRef<str>,
    R: AsRef<str>,
{
    if sources.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    if sources.len() != hypotheses.len() || sources.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            left: sources.len(),
            right: hypotheses.len().max(references.len()),
        });
    }
    let mut acc = SariStats::default();
    for ((s, h), r) in sources.iter().zip(hypotheses).zip(references) {
        acc = acc.merge(&SariStats::from_triple(s.as_ref(), h.as_ref(), r)?);
    }
    Ok(acc)
}

/// Corpus SARI, 0–100.
pub fn sari<S, H, R>(sources: &[S], hypotheses: &[H], references: &[Vec<R>]) -> Result<f64, MetricError>
where
    S: AsRef<str>,
    H: AsRef<str>,
    R: AsRef<str>,
{
    Ok(sari_stats(sources, hypotheses, references)?.score())
}
