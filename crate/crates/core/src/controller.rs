//! The iterative simplification loop.
//!
//! Each round annotates the current sentence, stops if its hardest rated word
//! is already below the target age, and otherwise asks the rewriter to
//! replace the chosen target word(s). The full output is re-annotated next
//! round, so a rewrite that touches surrounding words is judged as a whole.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::AoaLexicon;
use crate::rewriter::{rewrite_with, PromptVariant, RetryPolicy, RewriteError, RewriterBackend, SimplifyRequest};
use crate::textproc::{annotate, tag_words, AnalyzedSentence, TextError};

pub const DEFAULT_MAX_ITERATIONS: usize = 5;
pub const DEFAULT_TARGET_AGE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// The single hardest word per round.
    #[default]
    Single,
    /// Every word at or above the target age per round.
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Success,
    IterationCap,
    BackendFailure,
    NoRatedWords,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub index: usize,
    pub input_sentence: String,
    pub target_words: Vec<String>,
    pub output_sentence: String,
    pub max_aoa_before: Option<f64>,
    pub max_aoa_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplifyResult {
    pub final_sentence: String,
    pub success: bool,
    pub iterations: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    pub target_age: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SimplifyResult {
    /// Output after at most `k` iterations (the input when `k == 0`).
    pub fn output_after(&self, input: &str, k: usize) -> String {
        match k.min(self.iterations.len()) {
            0 => input.to_owned(),
            n => self.iterations[n - 1].output_sentence.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("max_iterations must be at least 1")]
    ZeroIterations,
    #[error("empty translation")]
    EmptyTranslation,
    #[error("no words given")]
    NoWords,
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Rewrite(RewriteError),
}

/// Knobs shared by [`simplify`] and [`simplify_user`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplifyOptions {
    pub target_age: f64,
    pub mode: SelectionMode,
    pub variant: PromptVariant,
    pub max_iterations: usize,
    /// Feed earlier outputs back into the prompt. Off by default.
    pub include_history: bool,
    pub retry: RetryPolicy,
}

impl Default for SimplifyOptions {
    fn default() -> Self {
        Self {
            target_age: DEFAULT_TARGET_AGE,
            mode: SelectionMode::Single,
            variant: PromptVariant::Proposed,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            include_history: false,
            retry: RetryPolicy::default(),
        }
    }
}

/// Words to hand to the rewriter. `Single` yields the hardest word when it is
/// at or above `target_age`; `Multi` yields every such word in order.
pub fn select_targets(analyzed: &AnalyzedSentence, target_age: f64, mode: SelectionMode) -> Vec<String> {
    match mode {
        SelectionMode::Single => analyzed
            .max_token()
            .filter(|t| t.aoa.is_some_and(|a| a >= target_age))
            .map(|t| vec![t.surface.clone()])
            .unwrap_or_default(),
        SelectionMode::Multi => analyzed
            .words()
            .filter(|t| t.aoa.is_some_and(|a| a >= target_age))
            .map(|t| t.surface.clone())
            .collect(),
    }
}

fn request_for(
    variant: PromptVariant,
    sentence: &str,
    source: Option<&str>,
    targets: Vec<String>,
    target_age: f64,
    history: Vec<String>,
) -> SimplifyRequest {
    let mut req = SimplifyRequest::new(variant, sentence, target_age).with_history(history);
    if let Some(s) = source {
        req = req.with_source(s);
    }
    if variant.takes_target_words() {
        req = req.with_targets(targets);
    }
    req
}

/// Runs the simplification loop on one translation.
pub fn simplify(
    translation: &str,
    source: Option<&str>,
    lex: &AoaLexicon,
    backend: &dyn RewriterBackend,
    opts: &SimplifyOptions,
) -> Result<SimplifyResult, ControllerError> {
    if opts.max_iterations == 0 {
        return Err(ControllerError::ZeroIterations);
    }
    if translation.trim().is_empty() {
        return Err(ControllerError::EmptyTranslation);
    }
    let mut current = translation.to_owned();
    let mut analyzed = annotate(lex, &current);
    let mut iterations: Vec<IterationRecord> = Vec::new();
    loop {
        let max_before = analyzed.max_aoa();
        match max_before {
            None => return Ok(finish(current, iterations, StopReason::NoRatedWords, true, opts, None)),
            Some(a) if a < opts.target_age => {
                return Ok(finish(current, iterations, StopReason::Success, true, opts, None))
            }
            Some(_) => {}
        }
        if iterations.len() >= opts.max_iterations {
            return Ok(finish(current, iterations, StopReason::IterationCap, false, opts, None));
        }
        let targets = select_targets(&analyzed, opts.target_age, opts.mode);
        let history = if opts.include_history {
            iterations.iter().map(|r| r.output_sentence.clone()).collect()
        } else {
            Vec::new()
        };
        let req = request_for(
            opts.variant,
            &current,
            source,
            targets.clone(),
            opts.target_age,
            history,
        );
        let output = match rewrite_with(backend, &req, &opts.retry) {
            Ok(out) => out,
            Err(e @ RewriteError::Backend { .. }) => {
                log::warn!("backend failure after {} iteration(s): {e}", iterations.len());
                let msg = e.to_string();
                return Ok(finish(
                    current,
                    iterations,
                    StopReason::BackendFailure,
                    false,
                    opts,
                    Some(msg),
                ));
            }
            Err(e) => return Err(ControllerError::Rewrite(e)),
        };
        let next = annotate(lex, &output);
        iterations.push(IterationRecord {
            index: iterations.len() + 1,
            input_sentence: current,
            target_words: if opts.variant.takes_target_words() {
                targets
            } else {
                Vec::new()
            },
            output_sentence: output.clone(),
            max_aoa_before: max_before,
            max_aoa_after: next.max_aoa(),
        });
        current = output;
        analyzed = next;
    }
}

fn finish(
    final_sentence: String,
    iterations: Vec<IterationRecord>,
    stop_reason: StopReason,
    success: bool,
    opts: &SimplifyOptions,
    error: Option<String>,
) -> SimplifyResult {
    SimplifyResult {
        final_sentence,
        success,
        iterations,
        stop_reason,
        target_age: opts.target_age,
        error,
    }
}

/// One rewrite pass on words chosen by the user, regardless of their AoA.
/// Success is still judged against `opts.target_age`.
pub fn simplify_user<S: AsRef<str>>(
    translation: &str,
    source: Option<&str>,
    user_words: &[S],
    lex: &AoaLexicon,
    backend: &dyn RewriterBackend,
    opts: &SimplifyOptions,
) -> Result<SimplifyResult, ControllerError> {
    if translation.trim().is_empty() {
        return Err(ControllerError::EmptyTranslation);
    }
    if user_words.is_empty() {
        return Err(ControllerError::NoWords);
    }
    // Surface word-not-found before anything is sent.
    tag_words(translation.trim(), user_words)?;
    let words: Vec<String> = user_words.iter().map(|w| w.as_ref().to_owned()).collect();
    let variant = if opts.variant.takes_target_words() {
        opts.variant
    } else {
        PromptVariant::Proposed
    };
    let before = annotate(lex, translation);
    let req = request_for(variant, translation, source, words.clone(), opts.target_age, Vec::new());
    let output = match rewrite_with(backend, &req, &opts.retry) {
        Ok(out) => out,
        Err(e @ RewriteError::Backend { .. }) => {
            let msg = e.to_string();
            let success = before.is_below(opts.target_age);
            return Ok(finish(
                translation.to_owned(),
                Vec::new(),
                StopReason::BackendFailure,
                success,
                opts,
                Some(msg),
            ));
        }
        Err(e) => return Err(ControllerError::Rewrite(e)),
    };
    let after = annotate(lex, &output);
    let success = after.is_below(opts.target_age);
    let stop_reason = match (success, after.max_aoa()) {
        (true, None) => StopReason::NoRatedWords,
        (true, Some(_)) => StopReason::Success,
        (false, _) => StopReason::IterationCap,
    };
    let record = IterationRecord {
        index: 1,
        input_sentence: translation.to_owned(),
        target_words: words,
        output_sentence: output.clone(),
        max_aoa_before: before.max_aoa(),
        max_aoa_after: after.max_aoa(),
    };
    Ok(finish(output, vec![record], stop_reason, success, opts, None))
}
