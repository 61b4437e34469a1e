use std::collections::{BTreeSet, HashMap};

use super::TokenModel;
use crate::textproc::tokenize;

/// Explicit bigram log-probability table.
///
/// `rows[i]` is the next-token distribution after vocabulary token `i`;
/// the last row (index `vocab.len()`) is the distribution at sentence start.
/// Each row has `vocab.len() + 1` entries, the last being end-of-sequence.
#[derive(Debug, Clone)]
pub struct BigramTable {
    vocab: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl BigramTable {
    pub fn new(vocab: Vec<String>, rows: Vec<Vec<f64>>) -> Self {
        assert_eq!(rows.len(), vocab.len() + 1, "one row per token plus a start row");
        assert!(rows.iter().all(|r| r.len() == vocab.len() + 1));
        Self { vocab, rows }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl TokenModel for BigramTable {
    fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    fn log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        let row = prefix.last().copied().unwrap_or(self.vocab.len());
        self.rows[row].clone()
    }
}

/// Count-based n-gram language model with add-k smoothing.
///
/// `P(w | ctx) = (c(ctx, w) + k) / (c(ctx) + k·(|V| + 1))`, where the `+ 1`
/// is end-of-sequence. With `k = 0` unseen contexts have no continuation.
#[derive(Debug, Clone)]
pub struct NgramModel {
    order: usize,
    k: f64,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    /// context (padded with the start id) → (next id → count)
    counts: HashMap<Vec<usize>, HashMap<usize, u64>>,
}

impl NgramModel {
    /// Trains on whitespace/punctuation tokenized lines. Vocabulary ids are
    /// assigned in sorted order so models are reproducible.
    pub fn train<I, S>(order: usize, k: f64, lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let sentences: Vec<Vec<String>> = lines
            .into_iter()
            .map(|l| tokenize(l.as_ref()).into_iter().map(|t| t.surface).collect::<Vec<_>>())
            .filter(|t: &Vec<String>| !t.is_empty())
            .collect();
        let vocab: Vec<String> = sentences
            .iter()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Self::train_tokens(order, k, vocab, &sentences)
    }

    fn train_tokens(order: usize, k: f64, vocab: Vec<String>, sentences: &[Vec<String>]) -> Self {
        assert!(order >= 1, "order must be at least 1");
        assert!(k >= 0.0 && k.is_finite());
        let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let eos = vocab.len();
        let bos = vocab.len() + 1;
        let mut counts: HashMap<Vec<usize>, HashMap<usize, u64>> = HashMap::new();
        for sent in sentences {
            let mut ids: Vec<usize> = vec![bos; order - 1];
            ids.extend(sent.iter().map(|w| index[w]));
            ids.push(eos);
            for i in (order - 1)..ids.len() {
                let ctx = ids[i + 1 - order..i].to_vec();
                *counts.entry(ctx).or_default().entry(ids[i]).or_insert(0) += 1;
            }
        }
        Self {
            order,
            k,
            vocab,
            index,
            counts,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn token_id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    fn context(&self, prefix: &[usize]) -> Vec<usize> {
        let need = self.order - 1;
        let bos = self.vocab.len() + 1;
        let mut ctx = vec![bos; need.saturating_sub(prefix.len())];
        ctx.extend_from_slice(&prefix[prefix.len().saturating_sub(need)..]);
        ctx
    }
}

impl TokenModel for NgramModel {
    fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    fn log_probs(&self, prefix: &[usize]) -> Vec<f64> {
        let n_out = self.vocab.len() + 1;
        let ctx = self.context(prefix);
        let row = self.counts.get(&ctx);
        let total: u64 = row.map(|r| r.values().sum()).unwrap_or(0);
        let denom = total as f64 + self.k * n_out as f64;
        (0..n_out)
            .map(|id| {
                let c = row.and_then(|r| r.get(&id)).copied().unwrap_or(0) as f64 + self.k;
                if c == 0.0 || denom == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (c / denom).ln()
                }
            })
            .collect()
    }
}
