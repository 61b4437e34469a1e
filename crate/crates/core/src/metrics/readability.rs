//! Flesch-Kincaid grade level and Dale-Chall readability.
//!
//! Every input record counts as one sentence. Only word tokens (tokens that
//! contain a letter) count as words.

use std::collections::HashSet;
use std::path::Path;

use super::MetricError;
use crate::lexicon::normalize;
use crate::textproc::{count_syllables, tokenize};

/// Familiar-word list for Dale-Chall. Entries are lowercase.
#[derive(Debug, Clone, Default)]
pub struct FamiliarWords {
    words: HashSet<String>,
}

impl FamiliarWords {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            words: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// Reads a plain-text list, one word per line.
    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::new(text.lines()))
    }

    /// The standard Dale-Chall list shipped with the crate.
    pub fn bundled() -> Self {
        Self::new(include_str!("../../fixtures/dale_chall_familiar.txt").lines())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// A word is familiar if any of its normalization candidates is listed.
    pub fn is_familiar(&self, word: &str) -> bool {
        normalize(word).iter().any(|c| self.words.contains(c))
    }
}

/// Word, syllable and difficult-word totals over a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReadabilityCounts {
    pub sentences: u64,
    pub words: u64,
    pub syllables: u64,
    pub difficult: u64,
}

impl ReadabilityCounts {
    pub fn from_text(text: &str, familiar: Option<&FamiliarWords>) -> Self {
        let mut c = ReadabilityCounts {
            sentences: 1,
            ..Default::default()
        };
        for tok in tokenize(text).iter().filter(|t| t.is_word) {
            c.words += 1;
            c.syllables += count_syllables(&tok.surface) as u64;
            if familiar.is_some_and(|f| !f.is_familiar(&tok.surface)) {
                c.difficult += 1;
            }
        }
        c
    }

    pub fn merge(mut self, other: &Self) -> Self {
        self.sentences += other.sentences;
        self.words += other.words;
        self.syllables += other.syllables;
        self.difficult += other.difficult;
        self
    }

    pub fn fkgl(&self) -> Result<f64, MetricError> {
        if self.words == 0 {
            return Err(MetricError::NoWords);
        }
        let wps = self.words as f64 / self.sentences as f64;
        let spw = self.syllables as f64 / self.words as f64;
        Ok(0.39 * wps + 11.8 * spw - 15.59)
    }

    pub fn dale_chall(&self) -> Result<f64, MetricError> {
        if self.words == 0 {
            return Err(MetricError::NoWords);
        }
        let pdw = 100.0 * self.difficult as f64 / self.words as f64;
        let wps = self.words as f64 / self.sentences as f64;
        let raw = 0.1579 * pdw + 0.0496 * wps;
        Ok(if pdw > 5.0 { raw + 3.6365 } else { raw })
    }
}

fn corpus_counts<T: AsRef<str>>(
    texts: &[T],
    familiar: Option<&FamiliarWords>,
) -> Result<ReadabilityCounts, MetricError> {
    if texts.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(texts
        .iter()
        .map(|t| ReadabilityCounts::from_text(t.as_ref(), familiar))
        .fold(ReadabilityCounts::default(), |a, c| a.merge(&c)))
}

/// `0.39 · words/sentences + 11.8 · syllables/words − 15.59`.
pub fn fkgl<T: AsRef<str>>(texts: &[T]) -> Result<f64, MetricError> {
    corpus_counts(texts, None)?.fkgl()
}

/// `0.1579 · %difficult + 0.0496 · words/sentences`, plus 3.6365 when more
/// than 5% of words are difficult.
pub fn dale_chall<T: AsRef<str>>(texts: &[T], familiar: &FamiliarWords) -> Result<f64, MetricError> {
    corpus_counts(texts, Some(familiar))?.dale_chall()
}
