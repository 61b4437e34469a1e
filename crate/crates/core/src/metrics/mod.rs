//! Translation and simplification metrics.
//!
//! Everything here is native except COMET, which needs a trained model and is
//! reached through [`ExternalScorer`].

mod bleu;
mod readability;
mod sari;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bleu::{bleu, bleu_stats, BleuStats};
pub use readability::{dale_chall, fkgl, FamiliarWords, ReadabilityCounts};
pub use sari::{sari, sari_stats, OpCounts, SariComponents, SariStats};

use crate::lexicon::AoaLexicon;
use crate::textproc::annotate;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("corpus length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("corpus has no word tokens")]
    NoWords,
    #[error("a sentence has an empty reference list")]
    EmptyReferences,
    #[error("external scorer failed: {0}")]
    External(String),
}

pub(crate) fn check_pairs(left: usize, right: usize) -> Result<(), MetricError> {
    if left != right {
        return Err(MetricError::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(())
}

/// Highest rated AoA per sentence (`None` for sentences without ratings).
pub fn sentence_maxima<T: AsRef<str>>(texts: &[T], lex: &AoaLexicon) -> Vec<Option<f64>> {
    texts.iter().map(|t| annotate(lex, t.as_ref()).max_aoa()).collect()
}

/// Mean of the per-sentence highest AoA. Sentences with no rated word
/// contribute 0 and still count in the denominator.
pub fn average_max_aoa<T: AsRef<str>>(texts: &[T], lex: &AoaLexicon) -> Result<f64, MetricError> {
    if texts.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    let maxima = sentence_maxima(texts, lex);
    Ok(mean_of_maxima(&maxima))
}

pub(crate) fn mean_of_maxima(maxima: &[Option<f64>]) -> f64 {
    maxima.iter().map(|m| m.unwrap_or(0.0)).sum::<f64>() / maxima.len() as f64
}

pub(crate) fn success_of_maxima(maxima: &[Option<f64>], target_age: f64) -> f64 {
    let ok = maxima.iter().filter(|m| m.is_none_or(|a| a < target_age)).count();
    ok as f64 / maxima.len() as f64
}

/// Fraction of sentences whose highest rated AoA is strictly below
/// `target_age`. Sentences with no rated word count as successes.
pub fn success_rate<T: AsRef<str>>(texts: &[T], lex: &AoaLexicon, target_age: f64) -> Result<f64, MetricError> {
    if texts.is_empty() {
        return Err(MetricError::EmptyCorpus);
    }
    Ok(success_of_maxima(&sentence_maxima(texts, lex), target_age))
}

/// Scorer backed by something outside this crate (e.g. a COMET server).
pub trait ExternalScorer: Send + Sync {
    fn name(&self) -> &str;
    /// System-level score on 0–100.
    fn score(&self, sources: &[String], hypotheses: &[String], references: &[String]) -> Result<f64, MetricError>;
}

/// Posts `{"data": [{"src", "mt", "ref"}, ...]}` to `url` and reads
/// `{"system_score": x}` with `x` on 0–1, as COMET servers report it.
#[derive(Debug, Clone)]
pub struct HttpScorer {
    pub name: String,
    pub url: String,
    pub timeout: std::time::Duration,
}

impl ExternalScorer for HttpScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, sources: &[String], hypotheses: &[String], references: &[String]) -> Result<f64, MetricError> {
        #[derive(Serialize)]
        struct Item<'a> {
            src: &'a str,
            mt: &'a str,
            #[serde(rename = "ref")]
            reference: &'a str,
        }
        #[derive(Deserialize)]
        struct Reply {
            system_score: f64,
        }
        let data: Vec<Item<'_>> = sources
            .iter()
            .zip(hypotheses)
            .zip(references)
            .map(|((s, h), r)| Item {
                src: s,
                mt: h,
                reference: r,
            })
            .collect();
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let reply: Reply = agent
            .post(&self.url)
            .send_json(serde_json::json!({ "data": data }))
            .and_then(|mut r| r.body_mut().read_json())
            .map_err(|e| MetricError::External(e.to_string()))?;
        Ok(100.0 * reply.system_score)
    }
}

/// One column of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n_sentences: usize,
    pub bleu: f64,
    pub sari: f64,
    pub fkgl: f64,
    pub dale_chall: f64,
    pub average_aoa: f64,
    pub success_rate: f64,
    pub comet: Option<f64>,
}

/// Shared inputs for [`evaluate`].
#[derive(Clone, Copy)]
pub struct MetricContext<'a> {
    pub lexicon: &'a AoaLexicon,
    pub familiar: &'a FamiliarWords,
    pub target_age: f64,
    pub comet: Option<&'a dyn ExternalScorer>,
}

/// Parallel corpora for [`evaluate`]. All slices have the same length.
#[derive(Debug, Clone, Copy)]
pub struct EvalCorpus<'a> {
    /// Source-language sentences, used by COMET only.
    pub sources: &'a [String],
    /// The sentences each system started from (the initial translations);
    /// SARI's source side.
    pub inputs: &'a [String],
    pub hypotheses: &'a [String],
    /// One reference per sentence.
    pub references: &'a [String],
}

/// Scores system outputs.
pub fn evaluate(ctx: &MetricContext<'_>, corpus: &EvalCorpus<'_>) -> Result<MetricReport, MetricError> {
    let EvalCorpus {
        sources,
        inputs,
        hypotheses,
        references,
    } = *corpus;
    check_pairs(hypotheses.len(), references.len())?;
    check_pairs(inputs.len(), hypotheses.len())?;
    check_pairs(sources.len(), hypotheses.len())?;
    let refs: Vec<Vec<&str>> = references.iter().map(|r| vec![r.as_str()]).collect();
    let maxima = sentence_maxima(hypotheses, ctx.lexicon);
    let comet = ctx
        .comet
        .map(|c| c.score(sources, hypotheses, references))
        .transpose()?;
    Ok(MetricReport {
        n_sentences: hypotheses.len(),
        bleu: bleu(hypotheses, references)?,
        sari: sari(inputs, hypotheses, &refs)?,
        fkgl: fkgl(hypotheses)?,
        dale_chall: dale_chall(hypotheses, ctx.familiar)?,
        average_aoa: mean_of_maxima(&maxima),
        success_rate: success_of_maxima(&maxima, ctx.target_age),
        comet,
    })
}
