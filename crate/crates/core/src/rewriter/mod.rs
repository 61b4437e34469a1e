//! Prompt construction and dispatch to a rewriting model.

pub(crate) mod backend;

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    BackendCapabilities, BackendError, ChatBackend, ChatBackendConfig, FnBackend, MockBackend, RewriterBackend,
};

use crate::textproc::{strip_tags, tag_words, TextError};

pub const PROPOSED_INSTRUCTION: &str = "Instruction: Translate the following source language sentence based on the machine translation by simplifying the words surrounded by <edit>.";
pub const NO_WORD_INSTRUCTION: &str =
    "Instruction: Translate the following source language sentence based on the machine translation.";
pub const NO_INTERMEDIATE_INSTRUCTION: &str =
    "Instruction: Simplify the following machine translation by simplifying the words surrounded by <edit>.";
pub const NO_INTERMEDIATE_NO_WORD_INSTRUCTION: &str = "Instruction: Simplify the following machine translation.";

pub const SOURCE_HEADER: &str = "### source language sentence:";
pub const MT_HEADER: &str = "### machine-translation:";
pub const HISTORY_HEADER: &str = "### previous simplification:";
pub const TRANSLATION_HEADER: &str = "### translation:";
pub const SIMPLIFIED_HEADER: &str = "### simplified sentence:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    /// Source sentence, machine translation and one tagged word.
    #[default]
    Proposed,
    /// Same template as `Proposed` with every target word tagged at once.
    MultiWord,
    /// Translate the source directly into simple language.
    DirectTranslation,
    /// Ablation: no source sentence.
    NoIntermediate,
    /// Ablation: no tagged words.
    NoWord,
    /// Ablation: neither source sentence nor tagged words.
    NoIntermediateNoWord,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 6] = [
        PromptVariant::Proposed,
        PromptVariant::MultiWord,
        PromptVariant::DirectTranslation,
        PromptVariant::NoIntermediate,
        PromptVariant::NoWord,
        PromptVariant::NoIntermediateNoWord,
    ];

    pub fn requires_source(self) -> bool {
        matches!(
            self,
            Self::Proposed | Self::MultiWord | Self::DirectTranslation | Self::NoWord
        )
    }

    pub fn takes_target_words(self) -> bool {
        matches!(self, Self::Proposed | Self::MultiWord | Self::NoIntermediate)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::MultiWord => "multi_word",
            Self::DirectTranslation => "direct_translation",
            Self::NoIntermediate => "no_intermediate",
            Self::NoWord => "no_word",
            Self::NoIntermediateNoWord => "no_intermediate_no_word",
        }
    }
}

impl std::fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PromptVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown prompt variant {s:?}"))
    }
}

fn default_source_language() -> String {
    "Japanese".to_owned()
}

/// One rewrite job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplifyRequest {
    /// The sentence in the source language (the intermediate translation
    /// in the back-translated benchmark).
    pub source_sentence: Option<String>,
    pub translation: String,
    #[serde(default)]
    pub target_words: Vec<String>,
    pub target_age: f64,
    #[serde(default)]
    pub variant: PromptVariant,
    /// Earlier outputs for the same sentence, oldest first. Only rendered
    /// when non-empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<String>,
    #[serde(default = "default_source_language")]
    pub source_language: String,
}

impl SimplifyRequest {
    pub fn new(variant: PromptVariant, translation: impl Into<String>, target_age: f64) -> Self {
        Self {
            source_sentence: None,
            translation: translation.into(),
            target_words: Vec::new(),
            target_age,
            variant,
            history: Vec::new(),
            source_language: default_source_language(),
        }
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source_sentence = Some(source.into());
        self
    }

    pub fn with_targets<S: Into<String>>(mut self, words: impl IntoIterator<Item = S>) -> Self {
        self.target_words = words.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_history(mut self, history: Vec<String>) -> Self {
        self.history = history;
        self
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        let v = self.variant;
        if v.requires_source() && self.source_sentence.as_deref().is_none_or(|s| s.trim().is_empty()) {
            return Err(PromptError::Invalid(format!("variant {v} needs a source sentence")));
        }
        if v.takes_target_words() && self.target_words.is_empty() {
            return Err(PromptError::Invalid(format!(
                "variant {v} needs at least one target word"
            )));
        }
        if !v.takes_target_words() && !self.target_words.is_empty() {
            return Err(PromptError::Invalid(format!("variant {v} takes no target words")));
        }
        if v != PromptVariant::DirectTranslation && self.translation.trim().is_empty() {
            return Err(PromptError::Invalid("empty translation".into()));
        }
        if !(self.target_age.is_finite() && self.target_age > 0.0) {
            return Err(PromptError::Invalid(format!("bad target age {}", self.target_age)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Text(#[from] TextError),
}

fn age_in_words(age: f64) -> String {
    const WORDS: [&str; 21] = [
        "zero",
        "one",
        "two",
        "three",
        "four",
        "five",
        "six",
        "seven",
        "eight",
        "nine",
        "ten",
        "eleven",
        "twelve",
        "thirteen",
        "fourteen",
        "fifteen",
        "sixteen",
        "seventeen",
        "eighteen",
        "nineteen",
        "twenty",
    ];
    if age.fract() == 0.0 && (0.0..=20.0).contains(&age) {
        WORDS[age as usize].to_owned()
    } else {
        format!("{age}")
    }
}

/// Renders the prompt text for `req`. Lines are joined with `\n` and the
/// prompt ends with the answer header, without a trailing newline.
pub fn build_prompt(req: &SimplifyRequest) -> Result<String, PromptError> {
    req.validate()?;
    let source = req.source_sentence.as_deref().unwrap_or("").trim();
    let mut lines: Vec<String> = Vec::new();
    if req.variant == PromptVariant::DirectTranslation {
        lines.push(format!(
            "You are a {}-English translator who only generates words that {}-year-old children can understand.",
            req.source_language,
            age_in_words(req.target_age)
        ));
        lines.push("Output the translation only.".into());
        lines.push(format!("### Source {} {source}", req.source_language));
        lines.push("### Translated English:".into());
        return Ok(lines.join("\n"));
    }

    let instruction = match req.variant {
        PromptVariant::Proposed | PromptVariant::MultiWord => PROPOSED_INSTRUCTION,
        PromptVariant::NoWord => NO_WORD_INSTRUCTION,
        PromptVariant::NoIntermediate => NO_INTERMEDIATE_INSTRUCTION,
        PromptVariant::NoIntermediateNoWord => NO_INTERMEDIATE_NO_WORD_INSTRUCTION,
        PromptVariant::DirectTranslation => unreachable!(),
    };
    lines.push(instruction.into());
    if req.variant.requires_source() {
        lines.push(format!("{SOURCE_HEADER} {source}"));
    }
    for prev in &req.history {
        lines.push(format!("{HISTORY_HEADER} {}", strip_tags(prev.trim())));
    }
    let translation = req.translation.trim();
    let mt = if req.target_words.is_empty() {
        translation.to_owned()
    } else {
        tag_words(translation, &req.target_words)?.text
    };
    lines.push(format!("{MT_HEADER} {mt}"));
    lines.push(
        match req.variant {
            PromptVariant::NoIntermediate | PromptVariant::NoIntermediateNoWord => SIMPLIFIED_HEADER,
            _ => TRANSLATION_HEADER,
        }
        .into(),
    );
    Ok(lines.join("\n"))
}

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("backend failed after {attempts} attempt(s): {source}")]
    Backend {
        attempts: u32,
        #[source]
        source: BackendError,
    },
}

impl RewriteError {
    pub fn backend_error(&self) -> Option<&BackendError> {
        match self {
            Self::Backend { source, .. } => Some(source),
            Self::Prompt(_) => None,
        }
    }
}

/// Retries on transport-level failures with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 2,
            initial_backoff_ms: 250,
        }
    }
}

impl RetryPolicy {
    pub const NONE: RetryPolicy = RetryPolicy {
        max_retries: 0,
        initial_backoff_ms: 0,
    };

    pub(crate) fn backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(self.initial_backoff_ms.saturating_mul(1 << attempt.min(16)))
    }
}

/// Trims the completion, drops echoed `<edit>` tags and keeps only the first
/// line.
pub fn postprocess_completion(raw: &str) -> String {
    let stripped = strip_tags(raw.trim());
    stripped.lines().next().unwrap_or("").trim().to_owned()
}

/// Builds the prompt for `req`, sends it with the default retry policy and
/// post-processes the completion.
pub fn rewrite(backend: &dyn RewriterBackend, req: &SimplifyRequest) -> Result<String, RewriteError> {
    rewrite_with(backend, req, &RetryPolicy::default())
}

pub fn rewrite_with(
    backend: &dyn RewriterBackend,
    req: &SimplifyRequest,
    retry: &RetryPolicy,
) -> Result<String, RewriteError> {
    let prompt = build_prompt(req)?;
    let mut attempt = 0;
    loop {
        let result = backend.complete(&prompt).and_then(|raw| {
            let out = postprocess_completion(&raw);
            if out.is_empty() {
                Err(BackendError::EmptyCompletion)
            } else {
                Ok(out)
            }
        });
        match result {
            Ok(out) => return Ok(out),
            Err(e) if e.is_retryable() && attempt < retry.max_retries => {
                log::debug!("rewrite attempt {} failed: {e}; retrying", attempt + 1);
                thread::sleep(retry.backoff(attempt));
                attempt += 1;
            }
            Err(source) => {
                return Err(RewriteError::Backend {
                    attempts: attempt + 1,
                    source,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;
    use std::sync::atomic::{AtomicU32, Ordering};

    const SRC: &str = "この用語は、アルバム上の特定の曲を数字で表すためによく使用されます。";
    const MT: &str = "This term is often used to denote certain songs on the album by numbers.";

    #[test]
    fn proposed_prompt_layout() {
        let req = SimplifyRequest::new(PromptVariant::Proposed, MT, 10.0)
            .with_source(SRC)
            .with_targets(["denote"]);
        let p = build_prompt(&req).unwrap();
        let expected = format!(
            "{PROPOSED_INSTRUCTION}\n### source language sentence: {SRC}\n### machine-translation: This term is often used to <edit>denote<edit> certain songs on the album by numbers.\n### translation:"
        );
        assert_eq!(p, expected);
    }

    #[test]
    fn ablation_layouts() {
        let p = build_prompt(&SimplifyRequest::new(PromptVariant::NoIntermediate, MT, 10.0).with_targets(["denote"]))
            .unwrap();
        assert!(!p.contains(SOURCE_HEADER));
        assert!(p.ends_with("### simplified sentence:"));
        assert!(p.starts_with(NO_INTERMEDIATE_INSTRUCTION));

        let p = build_prompt(&SimplifyRequest::new(PromptVariant::NoWord, MT, 10.0).with_source(SRC)).unwrap();
        assert_eq!(p.matches("<edit>").count(), 0);
        assert!(p.contains("### machine-translation: This term is often used to denote certain songs"));
        assert!(p.ends_with(TRANSLATION_HEADER));

        let p = build_prompt(&SimplifyRequest::new(PromptVariant::NoIntermediateNoWord, MT, 10.0)).unwrap();
        assert_eq!(
            p,
            format!("{NO_INTERMEDIATE_NO_WORD_INSTRUCTION}\n### machine-translation: {MT}\n### simplified sentence:")
        );
    }

    #[test]
    fn direct_translation_prompt() {
        let p =
            build_prompt(&SimplifyRequest::new(PromptVariant::DirectTranslation, "", 10.0).with_source(SRC)).unwrap();
        assert_eq!(
            p,
            format!(
                "You are a Japanese-English translator who only generates words that ten-year-old children can understand.\nOutput the translation only.\n### Source Japanese {SRC}\n### Translated English:"
            )
        );
    }

    #[test]
    fn invariants_enforced() {
        let bad = [
            SimplifyRequest::new(PromptVariant::Proposed, MT, 10.0).with_targets(["denote"]),
            SimplifyRequest::new(PromptVariant::Proposed, MT, 10.0).with_source(SRC),
            SimplifyRequest::new(PromptVariant::NoIntermediate, MT, 10.0),
            SimplifyRequest::new(PromptVariant::NoWord, MT, 10.0)
                .with_source(SRC)
                .with_targets(["denote"]),
        ];
        for req in bad {
            assert!(matches!(build_prompt(&req), Err(PromptError::Invalid(_))), "{req:?}");
        }
        let missing = SimplifyRequest::new(PromptVariant::Proposed, MT, 10.0)
            .with_source(SRC)
            .with_targets(["zebra"]);
        assert!(matches!(build_prompt(&missing), Err(PromptError::Text(_))));
    }

    #[test]
    fn postprocess_contract() {
        assert_eq!(postprocess_completion("  X <edit>Y<edit>\nZ"), "X Y");
    }

    #[test]
    fn retries_transport_but_not_empty() {
        let calls = AtomicU32::new(0);
        let flaky = FnBackend::new(|_: &str| {
            if calls.fetch_add(1, Ordering::SeqCst) < 2 {
                Err(BackendError::Transport("reset".into()))
            } else {
                Ok("fine".into())
            }
        });
        let req = SimplifyRequest::new(PromptVariant::NoIntermediateNoWord, MT, 10.0);
        assert_eq!(
            rewrite_with(
                &flaky,
                &req,
                &RetryPolicy {
                    max_retries: 2,
                    initial_backoff_ms: 0
                }
            )
            .unwrap(),
            "fine"
        );
        assert_eq!(calls.load(Ordering::SeqCst), 3);

        let calls = AtomicU32::new(0);
        let empty = FnBackend::new(|_: &str| {
            calls.fetch_add(1, Ordering::SeqCst);
            Ok("   \n".into())
        });
        let err = rewrite_with(
            &empty,
            &req,
            &RetryPolicy {
                max_retries: 2,
                initial_backoff_ms: 0,
            },
        )
        .unwrap_err();
        assert!(matches!(err.backend_error(), Some(BackendError::EmptyCompletion)));
        assert_eq!(calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn mock_rewrite() {
        let mock = MockBackend::new(HashMap::from([("denote".to_string(), "show".to_string())]));
        let req = SimplifyRequest::new(PromptVariant::Proposed, MT, 10.0)
            .with_source(SRC)
            .with_targets(["denote"]);
        assert_eq!(
            rewrite(&mock, &req).unwrap(),
            "This term is often used to show certain songs on the album by numbers."
        );
        let req = SimplifyRequest::new(PromptVariant::Proposed, MT, 10.0)
            .with_source(SRC)
            .with_targets(["certain"]);
        assert_eq!(rewrite(&mock, &req).unwrap(), MT);
    }
}
