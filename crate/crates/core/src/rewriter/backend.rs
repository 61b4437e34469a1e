use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{MT_HEADER, SOURCE_HEADER};
use crate::textproc::{strip_tags, EDIT_TAG};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("backend returned HTTP {code}")]
    Status { code: u16 },
    #[error("backend returned an empty completion")]
    EmptyCompletion,
    #[error("malformed backend response: {0}")]
    Malformed(String),
}

impl BackendError {
    /// Transport-level failures worth retrying. Empty completions never are.
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Timeout | Self::Transport(_) => true,
            Self::Status { code } => *code == 429 || *code >= 500,
            Self::EmptyCompletion | Self::Malformed(_) => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BackendCapabilities {
    pub max_in_flight: usize,
    pub timeout: Duration,
}

/// A text-completion model that rewrites prompts built by
/// [`build_prompt`](super::build_prompt). Implementations must tolerate
/// `max_in_flight` concurrent calls.
pub trait RewriterBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;

    fn capabilities(&self) -> BackendCapabilities;

    /// Settings worth recording next to results (model, decoding params).
    fn describe(&self) -> serde_json::Value;
}

impl<T: RewriterBackend + ?Sized> RewriterBackend for std::sync::Arc<T> {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        (**self).complete(prompt)
    }
    fn capabilities(&self) -> BackendCapabilities {
        (**self).capabilities()
    }
    fn describe(&self) -> serde_json::Value {
        (**self).describe()
    }
}

/// Offline backend: substitutes every `<edit>`-tagged word of the prompt's
/// machine-translation line with a mapped phrase (unmapped words stay).
///
/// A sentence table can also be attached; when the untagged machine
/// translation matches an entry exactly, the mapped sentence is returned
/// verbatim instead. Prompts without a machine-translation line echo the
/// source sentence.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    substitutions: HashMap<String, String>,
    sentences: HashMap<String, String>,
}

impl MockBackend {
    pub fn new(substitutions: HashMap<String, String>) -> Self {
        Self {
            substitutions,
            sentences: HashMap::new(),
        }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn with_sentence(mut self, input: impl Into<String>, output: impl Into<String>) -> Self {
        self.sentences.insert(input.into(), output.into());
        self
    }

    pub fn with_sentences<I, A, B>(mut self, pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        self.sentences
            .extend(pairs.into_iter().map(|(a, b)| (a.into(), b.into())));
        self
    }

    fn substitute(&self, word: &str) -> String {
        if let Some(p) = self.substitutions.get(word) {
            return p.clone();
        }
        match self.substitutions.get(&word.to_lowercase()) {
            Some(p) if word.chars().next().is_some_and(char::is_uppercase) => {
                let mut chars = p.chars();
                chars
                    .next()
                    .map(|c| c.to_uppercase().chain(chars).collect())
                    .unwrap_or_default()
            }
            Some(p) => p.clone(),
            None => word.to_owned(),
        }
    }

    fn rewrite_line(&self, line: &str) -> String {
        let untagged = strip_tags(line);
        if let Some(out) = self.sentences.get(untagged.trim()) {
            return out.clone();
        }
        let mut out = String::with_capacity(line.len());
        let mut rest = line;
        while let Some(open) = rest.find(EDIT_TAG) {
            let after = &rest[open + EDIT_TAG.len()..];
            let Some(close) = after.find(EDIT_TAG) else { break };
            out.push_str(&rest[..open]);
            out.push_str(&self.substitute(&after[..close]));
            rest = &after[close + EDIT_TAG.len()..];
        }
        out.push_str(rest);
        strip_tags(&out)
    }
}

fn header_value<'a>(prompt: &'a str, header: &str) -> Option<&'a str> {
    prompt.lines().find_map(|l| l.strip_prefix(header)).map(str::trim)
}

impl RewriterBackend for MockBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        if let Some(mt) = header_value(prompt, MT_HEADER) {
            return Ok(self.rewrite_line(mt));
        }
        let source = header_value(prompt, SOURCE_HEADER).or_else(|| {
            prompt
                .lines()
                .find_map(|l| l.strip_prefix("### Source "))
                .and_then(|rest| rest.split_once(' ').map(|(_, s)| s.trim()))
        });
        source
            .map(|s| self.rewrite_line(s))
            .ok_or_else(|| BackendError::Malformed("prompt has no sentence line".into()))
    }

    fn capabilities(&self) -> BackendCapabilities {
        BackendCapabilities {
            max_in_flight: usize::MAX,
            timeout: Duration::from_secs(1),
        }
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "mock",
            "substitutions": self.substitutions.len(),
            "sentences": self.sentences.len(),
        })
    }
}

/// Wraps a closure as a backend. Handy for tests and scripted failures.
pub struct FnBackend<F> {
    f: F,
    max_in_flight: usize,
}

impl<F> FnBackend<F>
where
    F: Fn(&str) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f, max_in_flight: 1 }
    }

    pub fn with_max_in_flight(mut self, n: usize) -> Self {
        self.max_in_flight = n.max(1);
        self
    }
}

impl<F> RewriterBackend for FnBackend<F>
where
    F: Fn(&str) -> Result<String, BackendError> + Send + Sync,
{
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        (self.f)(prompt)
    }

    fn capabilities(&self) -> BackendCapabilities {
        BackendCapabilities {
            max_in_flight: self.max_in_flight,
            timeout: Duration::from_secs(60),
        }
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "fn" })
    }
}

fn default_temperature() -> f64 {
    0.0
}
fn default_max_tokens() -> u32 {
    256
}
fn default_timeout_secs() -> u64 {
    60
}
fn default_max_in_flight() -> usize {
    4
}
fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_owned()
}

/// Settings for an OpenAI-compatible `/chat/completions` endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatBackendConfig {
    /// e.g. `http://localhost:8000/v1`
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
}

impl ChatBackendConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: default_api_key_env(),
            temperature: default_temperature(),
            max_tokens: default_max_tokens(),
            timeout_secs: default_timeout_secs(),
            max_in_flight: default_max_in_flight(),
        }
    }
}

/// Sends the prompt as a single user message and returns the first choice.
pub struct ChatBackend {
    config: ChatBackendConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl ChatBackend {
    pub fn new(config: ChatBackendConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(true)
            .build()
            .into();
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        Self { config, agent, api_key }
    }

    pub fn config(&self) -> &ChatBackendConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    #[serde(default)]
    content: Option<String>,
}

pub(crate) fn map_ureq_error(e: ureq::Error) -> BackendError {
    match e {
        ureq::Error::StatusCode(code) => BackendError::Status { code },
        ureq::Error::Timeout(_) => BackendError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => BackendError::Timeout,
        other => BackendError::Transport(other.to_string()),
    }
}

impl RewriterBackend for ChatBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let body = serde_json::json!({
            "model": self.config.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "n": 1,
        });
        let mut req = self.agent.post(&self.endpoint());
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(map_ureq_error)?;
        let reply: ChatReply = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        reply
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed("no choices in response".into()))
    }

    fn capabilities(&self) -> BackendCapabilities {
        BackendCapabilities {
            max_in_flight: self.config.max_in_flight.max(1),
            timeout: Duration::from_secs(self.config.timeout_secs),
        }
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "chat",
            "base_url": self.config.base_url,
            "model": self.config.model,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "timeout_secs": self.config.timeout_secs,
        })
    }
}
