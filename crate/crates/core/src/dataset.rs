//! Back-translation benchmark construction.
//!
//! A simple reference sentence is translated into a pivot language and back.
//! When the round trip raises the sentence's hardest AoA, the pair becomes a
//! training or test example: the back-translation plays the part of a hard
//! machine translation and the reference is its simple target.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::AoaLexicon;
use crate::rewriter::backend::map_ureq_error;
use crate::rewriter::{
    postprocess_completion, BackendError, ChatBackend, ChatBackendConfig, RetryPolicy, RewriterBackend,
};
use crate::textproc::annotate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetExample {
    /// Line number in the input corpus (0-based).
    pub id: usize,
    pub reference: String,
    pub intermediate: String,
    pub back_translation: String,
    pub ref_max_aoa: Option<f64>,
    pub bt_max_aoa: Option<f64>,
    pub aoa_diff: f64,
}

impl DatasetExample {
    /// Rates both ends against `lex` and fills in the maxima and difference.
    pub fn new(
        id: usize,
        reference: impl Into<String>,
        intermediate: impl Into<String>,
        back_translation: impl Into<String>,
        lex: &AoaLexicon,
    ) -> Self {
        let reference = reference.into();
        let back_translation = back_translation.into();
        let ref_max_aoa = annotate(lex, &reference).max_aoa();
        let bt_max_aoa = annotate(lex, &back_translation).max_aoa();
        Self {
            id,
            reference,
            intermediate: intermediate.into(),
            back_translation,
            ref_max_aoa,
            bt_max_aoa,
            aoa_diff: aoa_diff(ref_max_aoa, bt_max_aoa),
        }
    }
}

/// `bt − ref` when both are rated, otherwise 0.
pub fn aoa_diff(ref_max: Option<f64>, bt_max: Option<f64>) -> f64 {
    match (ref_max, bt_max) {
        (Some(r), Some(b)) => b - r,
        _ => 0.0,
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Record {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("split needs at least 10 examples, got {0}")]
    TooFew(usize),
    #[error("{failures} of {total} translations failed, above the ceiling of {ceiling}")]
    FailureCeiling {
        failures: usize,
        total: usize,
        ceiling: f64,
    },
    #[error("checkpoint {path} does not match this corpus: {reason}")]
    Checkpoint { path: PathBuf, reason: String },
    #[error("invalid option: {0}")]
    Invalid(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_owned(),
        source,
    }
}

/// One translation direction.
pub trait MtClient: Send + Sync {
    /// e.g. `en-ja`.
    fn label(&self) -> &str;
    fn translate(&self, text: &str) -> Result<String, BackendError>;
}

/// Looks translations up in a table; unknown inputs fail with a transport
/// error so they count as skipped.
#[derive(Debug, Clone, Default)]
pub struct TableMtClient {
    label: String,
    table: HashMap<String, String>,
}

impl TableMtClient {
    pub fn new(label: impl Into<String>, table: HashMap<String, String>) -> Self {
        Self {
            label: label.into(),
            table,
        }
    }
}

impl MtClient for TableMtClient {
    fn label(&self) -> &str {
        &self.label
    }
    fn translate(&self, text: &str) -> Result<String, BackendError> {
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| BackendError::Transport(format!("no table entry for {text:?}")))
    }
}

/// Returns its input.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityMtClient;

impl MtClient for IdentityMtClient {
    fn label(&self) -> &str {
        "identity"
    }
    fn translate(&self, text: &str) -> Result<String, BackendError> {
        Ok(text.to_owned())
    }
}

/// Wraps a closure.
pub struct FnMtClient<F> {
    label: String,
    f: F,
}

impl<F> FnMtClient<F>
where
    F: Fn(&str) -> Result<String, BackendError> + Send + Sync,
{
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self { label: label.into(), f }
    }
}

impl<F> MtClient for FnMtClient<F>
where
    F: Fn(&str) -> Result<String, BackendError> + Send + Sync,
{
    fn label(&self) -> &str {
        &self.label
    }
    fn translate(&self, text: &str) -> Result<String, BackendError> {
        (self.f)(text)
    }
}

/// Translates through an OpenAI-compatible chat endpoint.
pub struct ChatMtClient {
    label: String,
    from: String,
    to: String,
    backend: ChatBackend,
}

impl ChatMtClient {
    pub fn new(config: ChatBackendConfig, from: impl Into<String>, to: impl Into<String>) -> Self {
        let (from, to) = (from.into(), to.into());
        Self {
            label: format!("{from}-{to}"),
            from,
            to,
            backend: ChatBackend::new(config),
        }
    }

    pub fn prompt(&self, text: &str) -> String {
        format!(
            "Translate the following {} sentence into {}. Output the translation only.\n{}",
            self.from, self.to, text
        )
    }
}

impl MtClient for ChatMtClient {
    fn label(&self) -> &str {
        &self.label
    }
    fn translate(&self, text: &str) -> Result<String, BackendError> {
        let out = postprocess_completion(&self.backend.complete(&self.prompt(text))?);
        if out.is_empty() {
            Err(BackendError::EmptyCompletion)
        } else {
            Ok(out)
        }
    }
}

/// Posts `{"text", "source", "target"}` and reads `{"translation"}`.
pub struct HttpTranslateClient {
    label: String,
    url: String,
    from: String,
    to: String,
    agent: ureq::Agent,
}

impl HttpTranslateClient {
    pub fn new(url: impl Into<String>, from: impl Into<String>, to: impl Into<String>, timeout: Duration) -> Self {
        let (from, to) = (from.into(), to.into());
        Self {
            label: format!("{from}-{to}"),
            url: url.into(),
            from,
            to,
            agent: ureq::Agent::config_builder()
                .timeout_global(Some(timeout))
                .http_status_as_error(true)
                .build()
                .into(),
        }
    }
}

impl MtClient for HttpTranslateClient {
    fn label(&self) -> &str {
        &self.label
    }
    fn translate(&self, text: &str) -> Result<String, BackendError> {
        #[derive(Deserialize)]
        struct Reply {
            translation: String,
        }
        let body = serde_json::json!({ "text": text, "source": self.from, "target": self.to });
        let mut resp = self.agent.post(&self.url).send_json(&body).map_err(map_ureq_error)?;
        let reply: Reply = resp
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Malformed(e.to_string()))?;
        let out = reply.translation.trim().to_owned();
        if out.is_empty() {
            Err(BackendError::EmptyCompletion)
        } else {
            Ok(out)
        }
    }
}

fn translate_with_retry(client: &dyn MtClient, text: &str, retry: &RetryPolicy) -> Result<String, BackendError> {
    let mut attempt = 0;
    loop {
        match client.translate(text) {
            Ok(out) if out.trim().is_empty() => return Err(BackendError::EmptyCompletion),
            Ok(out) => return Ok(out),
            Err(e) if e.is_retryable() && attempt < retry.max_retries => {
                thread::sleep(retry.backoff(attempt));
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Concurrent MT requests.
    pub jobs: usize,
    /// Abort once failed sentences exceed this share of the corpus.
    pub max_failure_rate: f64,
    /// Records per checkpoint flush.
    pub checkpoint_every: usize,
    pub retry: RetryPolicy,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            jobs: 4,
            max_failure_rate: 0.05,
            checkpoint_every: 64,
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildFailure {
    pub id: usize,
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildOutcome {
    pub examples: Vec<DatasetExample>,
    pub failures: Vec<BuildFailure>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Progress {
    corpus_len: usize,
    next_index: usize,
    failures: Vec<BuildFailure>,
}

fn build_one(
    id: usize,
    reference: &str,
    fwd: &dyn MtClient,
    bwd: &dyn MtClient,
    lex: &AoaLexicon,
    retry: &RetryPolicy,
) -> Result<DatasetExample, BuildFailure> {
    let fail = |stage: &dyn MtClient, e: BackendError| BuildFailure {
        id,
        stage: stage.label().to_owned(),
        error: e.to_string(),
    };
    let intermediate = translate_with_retry(fwd, reference, retry).map_err(|e| fail(fwd, e))?;
    let back = translate_with_retry(bwd, &intermediate, retry).map_err(|e| fail(bwd, e))?;
    Ok(DatasetExample::new(id, reference, intermediate, back, lex))
}

struct Builder<'a> {
    corpus: &'a [String],
    fwd: &'a dyn MtClient,
    bwd: &'a dyn MtClient,
    lex: &'a AoaLexicon,
    opts: &'a BuildOptions,
    pool: rayon::ThreadPool,
}

impl Builder<'_> {
    fn ceiling(&self) -> usize {
        (self.opts.max_failure_rate * self.corpus.len() as f64).floor() as usize
    }

    /// Processes `[from, to)`; results come back in input order.
    fn chunk(&self, from: usize, to: usize) -> Vec<Result<DatasetExample, BuildFailure>> {
        self.pool.install(|| {
            (from..to)
                .into_par_iter()
                .map(|i| build_one(i, &self.corpus[i], self.fwd, self.bwd, self.lex, &self.opts.retry))
                .collect()
        })
    }

    fn check_ceiling(&self, failures: &[BuildFailure]) -> Result<(), DatasetError> {
        if failures.len() > self.ceiling() {
            return Err(DatasetError::FailureCeiling {
                failures: failures.len(),
                total: self.corpus.len(),
                ceiling: self.opts.max_failure_rate,
            });
        }
        Ok(())
    }
}

fn builder<'a>(
    corpus: &'a [String],
    fwd: &'a dyn MtClient,
    bwd: &'a dyn MtClient,
    lex: &'a AoaLexicon,
    opts: &'a BuildOptions,
) -> Result<Builder<'a>, DatasetError> {
    if opts.jobs == 0 || opts.checkpoint_every == 0 {
        return Err(DatasetError::Invalid(
            "jobs and checkpoint_every must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&opts.max_failure_rate) {
        return Err(DatasetError::Invalid("max_failure_rate must lie in [0, 1]".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs)
        .build()
        .map_err(|e| DatasetError::Invalid(e.to_string()))?;
    Ok(Builder {
        corpus,
        fwd,
        bwd,
        lex,
        opts,
        pool,
    })
}

/// Round-trips every corpus line through `fwd` then `bwd`. Failed lines are
/// skipped and reported; the run aborts once they exceed the ceiling.
pub fn build_examples(
    corpus: &[String],
    fwd: &dyn MtClient,
    bwd: &dyn MtClient,
    lex: &AoaLexicon,
    opts: &BuildOptions,
) -> Result<BuildOutcome, DatasetError> {
    let b = builder(corpus, fwd, bwd, lex, opts)?;
    let mut examples = Vec::with_capacity(corpus.len());
    let mut failures = Vec::new();
    let mut from = 0;
    while from < corpus.len() {
        let to = (from + opts.checkpoint_every).min(corpus.len());
        for r in b.chunk(from, to) {
            match r {
                Ok(ex) => examples.push(ex),
                Err(f) => failures.push(f),
            }
        }
        b.check_ceiling(&failures)?;
        from = to;
    }
    Ok(BuildOutcome { examples, failures })
}

/// Sidecar file recording how far a checkpointed build got.
pub fn progress_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".progress");
    PathBuf::from(name)
}

/// Like [`build_examples`] but appends records to `output` after every
/// chunk. If `output` and its `.progress` sidecar exist, the run resumes
/// where it stopped. The sidecar is removed on completion.
pub fn build_examples_checkpointed(
    corpus: &[String],
    fwd: &dyn MtClient,
    bwd: &dyn MtClient,
    lex: &AoaLexicon,
    opts: &BuildOptions,
    output: &Path,
) -> Result<BuildOutcome, DatasetError> {
    let b = builder(corpus, fwd, bwd, lex, opts)?;
    let sidecar = progress_path(output);
    let (mut examples, mut failures, mut from) = if sidecar.exists() && output.exists() {
        let text = fs::read_to_string(&sidecar).map_err(io_err(&sidecar))?;
        let progress: Progress = serde_json::from_str(&text).map_err(|e| DatasetError::Checkpoint {
            path: sidecar.clone(),
            reason: e.to_string(),
        })?;
        if progress.corpus_len != corpus.len() {
            return Err(DatasetError::Checkpoint {
                path: sidecar,
                reason: format!(
                    "corpus has {} lines, checkpoint expects {}",
                    corpus.len(),
                    progress.corpus_len
                ),
            });
        }
        // Drop anything written after the last recorded progress.
        let kept: Vec<DatasetExample> = read_jsonl::<DatasetExample>(output)?
            .into_iter()
            .filter(|e| e.id < progress.next_index)
            .collect();
        write_jsonl(output, &kept)?;
        log::info!("resuming at line {} with {} records", progress.next_index, kept.len());
        (kept, progress.failures, progress.next_index)
    } else {
        File::create(output).map_err(io_err(output))?;
        (Vec::new(), Vec::new(), 0)
    };
    while from < corpus.len() {
        let to = (from + opts.checkpoint_every).min(corpus.len());
        let mut fresh = Vec::new();
        for r in b.chunk(from, to) {
            match r {
                Ok(ex) => fresh.push(ex),
                Err(f) => {
                    log::warn!("line {} skipped at {}: {}", f.id, f.stage, f.error);
                    failures.push(f)
                }
            }
        }
        append_jsonl(output, &fresh)?;
        examples.extend(fresh);
        from = to;
        let progress = Progress {
            corpus_len: corpus.len(),
            next_index: from,
            failures: failures.clone(),
        };
        let text = serde_json::to_string(&progress).expect("progress serializes");
        fs::write(&sidecar, text).map_err(io_err(&sidecar))?;
        b.check_ceiling(&failures)?;
    }
    if sidecar.exists() {
        fs::remove_file(&sidecar).map_err(io_err(&sidecar))?;
    }
    Ok(BuildOutcome { examples, failures })
}

/// Keeps examples whose `aoa_diff` is strictly greater than `threshold`.
pub fn filter_pairs(examples: &[DatasetExample], threshold: f64) -> Vec<DatasetExample> {
    debug_assert!(threshold >= 0.0);
    examples.iter().filter(|e| e.aoa_diff > threshold).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Split {
    pub train: Vec<DatasetExample>,
    pub dev: Vec<DatasetExample>,
    pub test: Vec<DatasetExample>,
}

/// Seeded shuffle, then an 8:1:1 contiguous cut (⌊0.8n⌋, ⌊0.1n⌋, rest).
pub fn split(examples: &[DatasetExample], seed: u64) -> Result<Split, DatasetError> {
    let n = examples.len();
    if n < 10 {
        return Err(DatasetError::TooFew(n));
    }
    let mut shuffled = examples.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = n * 8 / 10;
    let n_dev = n / 10;
    let test = shuffled.split_off(n_train + n_dev);
    let dev = shuffled.split_off(n_train);
    Ok(Split {
        train: shuffled,
        dev,
        test,
    })
}

/// Keeps examples whose back-translation peaks above `age` while the
/// reference stays below it. Unrated sides never qualify.
pub fn select_target_age(examples: &[DatasetExample], age: f64) -> Vec<DatasetExample> {
    examples
        .iter()
        .filter(|e| e.bt_max_aoa.is_some_and(|b| b > age) && e.ref_max_aoa.is_some_and(|r| r < age))
        .cloned()
        .collect()
}

/// Reads UTF-8 text, one sentence per line; blank lines are skipped.
pub fn read_corpus(path: &Path) -> Result<Vec<String>, DatasetError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}

/// Crude extraction from a plain-text article dump: drops headings (lines
/// wrapped in `=` or starting with `#`) and short title-like lines, then
/// splits paragraphs after `.`, `!` or `?` followed by whitespace.
pub fn extract_sentences(text: &str, min_words: usize) -> Vec<String> {
    let mut out = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') || (line.starts_with('=') && line.ends_with('=')) {
            continue;
        }
        let mut start = 0;
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        for (k, &(b, c)) in chars.iter().enumerate() {
            let at_end = k + 1 == chars.len();
            if matches!(c, '.' | '!' | '?') && (at_end || chars[k + 1].1.is_whitespace()) {
                push_sentence(&line[start..b + 1], min_words, &mut out);
                start = b + 1;
            }
        }
        push_sentence(&line[start..], min_words, &mut out);
    }
    out
}

fn push_sentence(s: &str, min_words: usize, out: &mut Vec<String>) {
    let s = s.trim();
    let ends_properly = s.ends_with(['.', '!', '?']);
    if ends_properly && s.split_whitespace().count() >= min_words {
        out.push(s.to_owned());
    }
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| DatasetError::Record {
            path: path.to_owned(),
            line: i + 1,
            source,
        })?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DatasetError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_records(path, file, records)
}

fn append_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), DatasetError> {
    let file = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
    write_records(path, file, records)
}

fn write_records<T: Serialize>(path: &Path, file: File, records: &[T]) -> Result<(), DatasetError> {
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| DatasetError::Io {
            path: path.to_owned(),
            source: e.into(),
        })?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}
