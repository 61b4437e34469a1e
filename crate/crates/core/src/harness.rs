//! Experiment runner: executes one system over a test set, scores it and
//! writes the run's artifacts.
//!
//! A run directory holds `records.jsonl` (one line per test sentence),
//! `report.json` (metrics, per-iteration metrics and survivor counts, config
//! echo), `histogram.tsv` and `timing.json`. Everything except `timing.json`
//! is a pure function of the config and the backend's answers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constrained::{aoa_constraint, decode_or_fallback, NgramModel};
use crate::controller::IterationRecord;
use crate::controller::{
    simplify, SelectionMode, SimplifyOptions, StopReason, DEFAULT_MAX_ITERATIONS, DEFAULT_TARGET_AGE,
};
use crate::dataset::{read_corpus, read_jsonl, write_jsonl, DatasetError, DatasetExample};
use crate::lexicon::{load_lexicon, AoaLexicon, LexiconError, LexiconFormat};
use crate::metrics::{
    evaluate, EvalCorpus, ExternalScorer, FamiliarWords, HttpScorer, MetricContext, MetricError, MetricReport,
};
use crate::rewriter::{ChatBackend, ChatBackendConfig, MockBackend, PromptVariant, RetryPolicy, RewriterBackend};
use crate::textproc::{annotate, tokenize};

/// The systems a run can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    /// The back-translation itself, unedited.
    Initial,
    Proposed,
    MultiWord,
    Constrained,
    DirectTranslation,
    NoIntermediate,
    NoWord,
    NoIntermediateNoWord,
    /// Outputs produced elsewhere, one line per test sentence.
    ExternalFile,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Initial => "initial",
            Self::Proposed => "proposed",
            Self::MultiWord => "multi_word",
            Self::Constrained => "constrained",
            Self::DirectTranslation => "direct_translation",
            Self::NoIntermediate => "no_intermediate",
            Self::NoWord => "no_word",
            Self::NoIntermediateNoWord => "no_intermediate_no_word",
            Self::ExternalFile => "external_file",
        }
    }

    /// Prompt variant and selection mode for systems driven by a rewriter.
    pub fn rewriter_setup(self) -> Option<(PromptVariant, SelectionMode)> {
        let single = SelectionMode::Single;
        match self {
            Self::Proposed => Some((PromptVariant::Proposed, single)),
            Self::MultiWord => Some((PromptVariant::Proposed, SelectionMode::Multi)),
            Self::DirectTranslation => Some((PromptVariant::DirectTranslation, single)),
            Self::NoIntermediate => Some((PromptVariant::NoIntermediate, single)),
            Self::NoWord => Some((PromptVariant::NoWord, single)),
            Self::NoIntermediateNoWord => Some((PromptVariant::NoIntermediateNoWord, single)),
            Self::Initial | Self::Constrained | Self::ExternalFile => None,
        }
    }
}

impl std::fmt::Display for SystemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendConfig {
    /// Offline substitution table (see [`MockBackend`]).
    Mock {
        #[serde(default)]
        substitutions: BTreeMap<String, String>,
        #[serde(default)]
        sentences: BTreeMap<String, String>,
    },
    Chat(ChatBackendConfig),
}

impl BackendConfig {
    pub fn build(&self) -> Arc<dyn RewriterBackend> {
        match self {
            Self::Mock {
                substitutions,
                sentences,
            } => Arc::new(
                MockBackend::new(substitutions.clone().into_iter().collect()).with_sentences(sentences.clone()),
            ),
            Self::Chat(cfg) => Arc::new(ChatBackend::new(cfg.clone())),
        }
    }
}

fn default_beam_size() -> usize {
    6
}
fn default_order() -> usize {
    2
}
fn default_source_weight() -> usize {
    1
}

/// N-gram model and search settings for the constrained baseline. Each test
/// sentence gets its own model trained on `corpus` plus the sentence's
/// back-translation repeated `source_weight` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstrainedConfig {
    #[serde(default = "default_beam_size")]
    pub beam_size: usize,
    /// Token cap; defaults to the back-translation's length plus 5.
    #[serde(default)]
    pub max_len: Option<usize>,
    #[serde(default = "default_order")]
    pub order: usize,
    /// Add-k smoothing constant.
    #[serde(default)]
    pub k: f64,
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default = "default_source_weight")]
    pub source_weight: usize,
}

impl Default for ConstrainedConfig {
    fn default() -> Self {
        Self {
            beam_size: default_beam_size(),
            max_len: None,
            order: default_order(),
            k: 0.0,
            corpus: None,
            source_weight: default_source_weight(),
        }
    }
}

fn default_target_age() -> f64 {
    DEFAULT_TARGET_AGE
}
fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}
fn default_jobs() -> usize {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// One experiment. Relative paths in a config file are resolved against
/// the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    /// Column name in comparisons; defaults to the system name.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default = "default_target_age")]
    pub target_age: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default)]
    pub include_history: bool,
    pub lexicon: PathBuf,
    /// Dale-Chall list; the bundled list when absent.
    #[serde(default)]
    pub familiar: Option<PathBuf>,
    /// Line-delimited [`DatasetExample`] records.
    pub test_set: PathBuf,
    /// Not echoed into artifacts, so runs written to different places stay
    /// comparable byte for byte.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_jobs", skip_serializing)]
    pub jobs: usize,
    #[serde(default)]
    pub backend: Option<BackendConfig>,
    #[serde(default)]
    pub retry: Option<RetryPolicy>,
    #[serde(default)]
    pub constrained: Option<ConstrainedConfig>,
    #[serde(default)]
    pub external_file: Option<PathBuf>,
    /// COMET server; the COMET row is absent when unset.
    #[serde(default)]
    pub comet_url: Option<String>,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("sentence {id}: {message}")]
    Sentence { id: usize, message: String },
    #[error("runs were made on different test sets: {0}")]
    TestSetMismatch(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_owned(),
        source,
    }
}

impl ExperimentConfig {
    /// Minimal config with defaults for everything optional.
    pub fn new(system: SystemKind, lexicon: impl Into<PathBuf>, test_set: impl Into<PathBuf>) -> Self {
        Self {
            system,
            label: None,
            target_age: DEFAULT_TARGET_AGE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            include_history: false,
            lexicon: lexicon.into(),
            familiar: None,
            test_set: test_set.into(),
            output_dir: default_output_dir(),
            seed: 0,
            jobs: default_jobs(),
            backend: None,
            retry: None,
            constrained: None,
            external_file: None,
            comet_url: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| HarnessError::Config {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.lexicon);
        fix(&mut self.test_set);
        fix(&mut self.output_dir);
        if let Some(p) = self.familiar.as_mut() {
            fix(p);
        }
        if let Some(p) = self.external_file.as_mut() {
            fix(p);
        }
        if let Some(p) = self.constrained.as_mut().and_then(|c| c.corpus.as_mut()) {
            fix(p);
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.system.to_string())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Invalid(m.to_owned()));
        if !(self.target_age > 0.0 && self.target_age.is_finite()) {
            return bad("target_age must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1");
        }
        let mut paths = vec![&self.lexicon, &self.test_set];
        paths.extend(self.familiar.iter());
        paths.extend(self.external_file.iter());
        paths.extend(self.constrained.iter().filter_map(|c| c.corpus.as_ref()));
        for p in paths {
            if !p.exists() {
                return Err(HarnessError::Invalid(format!("{} does not exist", p.display())));
            }
        }
        if self.system.rewriter_setup().is_some() && self.backend.is_none() {
            return Err(HarnessError::Invalid(format!(
                "system {} needs a [backend] section",
                self.system
            )));
        }
        if self.system == SystemKind::ExternalFile && self.external_file.is_none() {
            return bad("system external_file needs external_file");
        }
        if let Some(c) = &self.constrained {
            if c.beam_size == 0 || c.order == 0 || c.max_len == Some(0) || c.source_weight == 0 {
                return bad("constrained settings must be positive");
            }
            if !(c.k >= 0.0 && c.k.is_finite()) {
                return bad("constrained.k must be non-negative");
            }
        }
        Ok(())
    }

    /// Iteration cap actually used: direct translation is a single pass.
    pub fn effective_iterations(&self) -> usize {
        match self.system {
            SystemKind::DirectTranslation => 1,
            s if s.rewriter_setup().is_some() => self.max_iterations,
            _ => 0,
        }
    }
}

/// Per-sentence outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: usize,
    /// Source-language sentence.
    pub source: String,
    /// The initial translation the system started from.
    pub input: String,
    pub reference: String,
    pub output: String,
    pub input_max_aoa: Option<f64>,
    pub output_max_aoa: Option<f64>,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub iterations: Vec<IterationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_reason: Option<StopReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback_used: Option<bool>,
}

impl SentenceRecord {
    /// Output after `k` rewrite rounds; sentences that stopped earlier keep
    /// their last output.
    pub fn output_after(&self, k: usize) -> &str {
        match k.min(self.iterations.len()) {
            0 => &self.input,
            n => &self.iterations[n - 1].output_sentence,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    /// 1-based.
    pub iteration: usize,
    /// Sentences that were rewritten in this iteration.
    pub generated: usize,
    /// Metrics over the whole test set, each sentence at its latest output.
    pub report: MetricReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub total_ms: u128,
    pub mean_sentence_ms: f64,
}

/// Everything a run produces. `records` and `timing` live in their own files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub label: String,
    pub system: SystemKind,
    pub test_set_sha256: String,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<serde_json::Value>,
    pub report: MetricReport,
    pub per_iteration: Vec<IterationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallbacks: Option<usize>,
    #[serde(skip)]
    pub records: Vec<SentenceRecord>,
    #[serde(skip)]
    pub timing: Timing,
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const HISTOGRAM_FILE: &str = "histogram.tsv";
pub const TIMING_FILE: &str = "timing.json";

impl RunArtifact {
    pub fn survivors(&self) -> Vec<usize> {
        self.per_iteration.iter().map(|r| r.generated).collect()
    }

    pub fn outputs(&self) -> Vec<String> {
        self.records.iter().map(|r| r.output.clone()).collect()
    }

    /// Writes every artifact file into `dir`.
    pub fn write(&self, dir: &Path, lex: &AoaLexicon) -> Result<(), HarnessError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_jsonl(&dir.join(RECORDS_FILE), &self.records)?;
        write_json(&dir.join(REPORT_FILE), self)?;
        let hist = aoa_histogram(&self.outputs(), lex, 1.0);
        let path = dir.join(HISTOGRAM_FILE);
        fs::write(&path, hist.to_tsv()).map_err(io_err(&path))?;
        write_json(&dir.join(TIMING_FILE), &self.timing)
    }

    /// Reads a run directory written by [`RunArtifact::write`].
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join(REPORT_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let mut art: RunArtifact = serde_json::from_str(&text).map_err(|e| HarnessError::Config {
            path: path.clone(),
            message: e.to_string(),
        })?;
        art.records = read_jsonl(&dir.join(RECORDS_FILE))?;
        let timing = dir.join(TIMING_FILE);
        if let Ok(text) = fs::read_to_string(&timing) {
            art.timing = serde_json::from_str(&text).unwrap_or_default();
        }
        Ok(art)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Hex SHA-256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String, HarnessError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Loaded inputs shared by every sentence job.
pub struct RunInputs {
    pub lexicon: AoaLexicon,
    pub familiar: FamiliarWords,
    pub examples: Vec<DatasetExample>,
    pub test_set_sha256: String,
}

impl RunInputs {
    pub fn load(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let lexicon = load_lexicon(&cfg.lexicon, LexiconFormat::Csv)?;
        let familiar = match &cfg.familiar {
            Some(p) => FamiliarWords::load(p).map_err(io_err(p))?,
            None => FamiliarWords::bundled(),
        };
        let examples: Vec<DatasetExample> = read_jsonl(&cfg.test_set)?;
        if examples.is_empty() {
            return Err(HarnessError::Invalid(format!(
                "{} has no records",
                cfg.test_set.display()
            )));
        }
        Ok(Self {
            lexicon,
            familiar,
            examples,
            test_set_sha256: file_sha256(&cfg.test_set)?,
        })
    }
}

/// Runs `cfg` with the backend it declares and writes artifacts into
/// `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifact, HarnessError> {
    let backend = cfg.backend.as_ref().map(BackendConfig::build);
    run_experiment_with(cfg, backend)
}

/// As [`run_experiment`] with an explicit backend (overrides the config's).
/// If a sentence fails, the records finished before it are still written
/// and the error names the sentence.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    backend: Option<Arc<dyn RewriterBackend>>,
) -> Result<RunArtifact, HarnessError> {
    cfg.validate()?;
    let inputs = RunInputs::load(cfg)?;
    log::info!(
        "running {} over {} sentences ({})",
        cfg.label(),
        inputs.examples.len(),
        cfg.test_set.display()
    );
    let started = Instant::now();
    let outcome = run_system(cfg, &inputs, backend.as_deref());
    let elapsed = started.elapsed();
    let (records, failure) = match outcome {
        Ok(records) => (records, None),
        Err((done, err)) => (done, Some(err)),
    };
    if let Some(err) = failure {
        fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
        write_jsonl(&cfg.output_dir.join(RECORDS_FILE), &records)?;
        return Err(err);
    }
    let mut art = score(cfg, &inputs, records, backend.as_deref())?;
    art.timing = timing(elapsed, art.records.len());
    art.write(&cfg.output_dir, &inputs.lexicon)?;
    Ok(art)
}

fn timing(elapsed: Duration, n: usize) -> Timing {
    Timing {
        total_ms: elapsed.as_millis(),
        mean_sentence_ms: elapsed.as_secs_f64() * 1000.0 / n.max(1) as f64,
    }
}

type SystemOutcome = Result<Vec<SentenceRecord>, (Vec<SentenceRecord>, HarnessError)>;

fn run_system(cfg: &ExperimentConfig, inputs: &RunInputs, backend: Option<&dyn RewriterBackend>) -> SystemOutcome {
    let lex = &inputs.lexicon;
    let examples = &inputs.examples;
    let base = |ex: &DatasetExample, output: String| {
        let output_max_aoa = annotate(lex, &output).max_aoa();
        SentenceRecord {
            id: ex.id,
            source: ex.intermediate.clone(),
            input: ex.back_translation.clone(),
            reference: ex.reference.clone(),
            success: output_max_aoa.is_none_or(|a| a < cfg.target_age),
            output,
            input_max_aoa: ex.bt_max_aoa,
            output_max_aoa,
            iterations: Vec::new(),
            stop_reason: None,
            fallback_used: None,
        }
    };
    match cfg.system {
        SystemKind::Initial => Ok(examples
            .iter()
            .map(|ex| base(ex, ex.back_translation.clone()))
            .collect()),
        SystemKind::ExternalFile => {
            let path = cfg.external_file.as_ref().expect("validated");
            let lines = read_corpus(path).map_err(|e| (Vec::new(), e.into()))?;
            if lines.len() != examples.len() {
                let msg = format!(
                    "{} has {} lines for {} test sentences",
                    path.display(),
                    lines.len(),
                    examples.len()
                );
                return Err((Vec::new(), HarnessError::Invalid(msg)));
            }
            Ok(examples.iter().zip(lines).map(|(ex, out)| base(ex, out)).collect())
        }
        SystemKind::Constrained => {
            let c = cfg.constrained.clone().unwrap_or_default();
            let corpus = match &c.corpus {
                Some(p) => read_corpus(p).map_err(|e| (Vec::new(), e.into()))?,
                None => Vec::new(),
            };
            let constraint = aoa_constraint(lex, cfg.target_age);
            let results: Vec<SentenceRecord> = with_pool(cfg.jobs, || {
                examples
                    .par_iter()
                    .map(|ex| {
                        let lines = corpus
                            .iter()
                            .map(String::as_str)
                            .chain(std::iter::repeat_n(ex.back_translation.as_str(), c.source_weight));
                        let model = NgramModel::train(c.order, c.k, lines);
                        let max_len = c.max_len.unwrap_or_else(|| tokenize(&ex.back_translation).len() + 5);
                        let out = decode_or_fallback(&model, &constraint, c.beam_size, max_len, &ex.back_translation);
                        let mut rec = base(ex, out.sentence);
                        rec.fallback_used = Some(out.fallback_used);
                        rec
                    })
                    .collect()
            });
            Ok(results)
        }
        system => {
            let (variant, mode) = system.rewriter_setup().expect("rewriter system");
            let Some(backend) = backend else {
                return Err((
                    Vec::new(),
                    HarnessError::Invalid(format!("system {system} needs a backend")),
                ));
            };
            let opts = SimplifyOptions {
                target_age: cfg.target_age,
                mode,
                variant,
                max_iterations: cfg.effective_iterations(),
                include_history: cfg.include_history,
                retry: cfg.retry.unwrap_or_default(),
            };
            let jobs = cfg.jobs.min(backend.capabilities().max_in_flight.max(1));
            let results: Vec<Result<SentenceRecord, HarnessError>> = with_pool(jobs, || {
                examples
                    .par_iter()
                    .map(|ex| {
                        let res = simplify(&ex.back_translation, Some(&ex.intermediate), lex, backend, &opts).map_err(
                            |e| HarnessError::Sentence {
                                id: ex.id,
                                message: e.to_string(),
                            },
                        )?;
                        if res.stop_reason == StopReason::BackendFailure {
                            return Err(HarnessError::Sentence {
                                id: ex.id,
                                message: res.error.unwrap_or_else(|| "backend failure".into()),
                            });
                        }
                        let mut rec = base(ex, res.final_sentence);
                        rec.success = res.success;
                        rec.iterations = res.iterations;
                        rec.stop_reason = Some(res.stop_reason);
                        Ok(rec)
                    })
                    .collect()
            });
            let mut done = Vec::with_capacity(results.len());
            for r in results {
                match r {
                    Ok(rec) => done.push(rec),
                    Err(e) => return Err((done, e)),
                }
            }
            Ok(done)
        }
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> T {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not build a {jobs}-thread pool ({e}); using the global pool");
            f()
        }
    }
}

fn score(
    cfg: &ExperimentConfig,
    inputs: &RunInputs,
    records: Vec<SentenceRecord>,
    backend: Option<&dyn RewriterBackend>,
) -> Result<RunArtifact, HarnessError> {
    let scorer = cfg.comet_url.as_ref().map(|url| HttpScorer {
        name: "comet".into(),
        url: url.clone(),
        timeout: Duration::from_secs(600),
    });
    let ctx = MetricContext {
        lexicon: &inputs.lexicon,
        familiar: &inputs.familiar,
        target_age: cfg.target_age,
        comet: scorer.as_ref().map(|s| s as &dyn ExternalScorer),
    };
    let report = report_for(&ctx, &records, |r| r.output.clone())?;
    let mut per_iteration = Vec::new();
    for k in 1..=cfg.effective_iterations() {
        let generated = records.iter().filter(|r| r.iterations.len() >= k).count();
        let report = report_for(&ctx, &records, |r| r.output_after(k).to_owned())?;
        per_iteration.push(IterationReport {
            iteration: k,
            generated,
            report,
        });
    }
    let fallbacks = (cfg.system == SystemKind::Constrained)
        .then(|| records.iter().filter(|r| r.fallback_used == Some(true)).count());
    Ok(RunArtifact {
        label: cfg.label(),
        system: cfg.system,
        test_set_sha256: inputs.test_set_sha256.clone(),
        config: cfg.clone(),
        backend: backend
            .filter(|_| cfg.system.rewriter_setup().is_some())
            .map(|b| b.describe()),
        report,
        per_iteration,
        fallbacks,
        records,
        timing: Timing::default(),
    })
}

/// Scores one output per record against the records' references.
pub fn report_for(
    ctx: &MetricContext<'_>,
    records: &[SentenceRecord],
    output: impl Fn(&SentenceRecord) -> String,
) -> Result<MetricReport, MetricError> {
    let sources: Vec<String> = records.iter().map(|r| r.source.clone()).collect();
    let inputs: Vec<String> = records.iter().map(|r| r.input.clone()).collect();
    let hyps: Vec<String> = records.iter().map(output).collect();
    let refs: Vec<String> = records.iter().map(|r| r.reference.clone()).collect();
    evaluate(
        ctx,
        &EvalCorpus {
            sources: &sources,
            inputs: &inputs,
            hypotheses: &hyps,
            references: &refs,
        },
    )
}

/// Distribution of per-sentence highest AoA.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AoaHistogram {
    pub bin_width: f64,
    /// `counts[i]` covers `[i·w, (i+1)·w)`.
    pub counts: Vec<usize>,
    pub unrated: usize,
}

impl AoaHistogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum::<usize>() + self.unrated
    }

    /// Count for the bin containing `aoa`.
    pub fn count_at(&self, aoa: f64) -> usize {
        let i = (aoa / self.bin_width).floor() as usize;
        self.counts.get(i).copied().unwrap_or(0)
    }

    /// Two columns, `bin` (lower edge) and `count`, closed by an `unrated`
    /// row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("bin\tcount\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{}\t{c}", fmt_num(i as f64 * self.bin_width));
        }
        let _ = writeln!(out, "unrated\t{}", self.unrated);
        out
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_owned()
}

/// Bins each text's highest AoA into `[k·w, (k+1)·w)` bins starting at 0.
/// Unrated texts go to the `unrated` bucket.
pub fn aoa_histogram<T: AsRef<str>>(texts: &[T], lex: &AoaLexicon, bin_width: f64) -> AoaHistogram {
    assert!(bin_width > 0.0, "bin_width must be positive");
    let mut counts: Vec<usize> = Vec::new();
    let mut unrated = 0;
    for t in texts {
        match annotate(lex, t.as_ref()).max_aoa() {
            Some(a) => {
                let i = (a.max(0.0) / bin_width).floor() as usize;
                if counts.len() <= i {
                    counts.resize(i + 1, 0);
                }
                counts[i] += 1;
            }
            None => unrated += 1,
        }
    }
    AoaHistogram {
        bin_width,
        counts,
        unrated,
    }
}

/// Results table across runs: one column per run (per iteration for
/// iterative systems), one row per metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub columns: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub values: Vec<Option<f64>>,
}

const METRIC_ROWS: [&str; 7] = [
    "BLEU",
    "COMET",
    "SARI",
    "FKGL",
    "Dale-Chall",
    "Average AoA",
    "Success Rate",
];

fn metric_values(r: &MetricReport) -> [Option<f64>; 7] {
    [
        Some(r.bleu),
        r.comet,
        Some(r.sari),
        Some(r.fkgl),
        Some(r.dale_chall),
        Some(r.average_aoa),
        Some(r.success_rate),
    ]
}

pub fn compare_runs(artifacts: &[RunArtifact]) -> Result<Comparison, HarnessError> {
    if let Some(first) = artifacts.first() {
        if let Some(other) = artifacts.iter().find(|a| a.test_set_sha256 != first.test_set_sha256) {
            return Err(HarnessError::TestSetMismatch(format!(
                "{} ({}) vs {} ({})",
                first.label, first.test_set_sha256, other.label, other.test_set_sha256
            )));
        }
    }
    let mut columns = Vec::new();
    let mut cells: Vec<[Option<f64>; 7]> = Vec::new();
    let mut generated: Vec<Option<f64>> = Vec::new();
    for a in artifacts {
        if a.per_iteration.is_empty() {
            columns.push(a.label.clone());
            cells.push(metric_values(&a.report));
            generated.push(None);
        } else {
            for it in &a.per_iteration {
                columns.push(format!("{} {}", a.label, it.iteration));
                cells.push(metric_values(&it.report));
                generated.push(Some(it.generated as f64));
            }
        }
    }
    let mut rows: Vec<ComparisonRow> = METRIC_ROWS
        .iter()
        .enumerate()
        .map(|(i, m)| ComparisonRow {
            metric: (*m).to_owned(),
            values: cells.iter().map(|c| c[i]).collect(),
        })
        .collect();
    rows.push(ComparisonRow {
        metric: "# of generated sentences".to_owned(),
        values: generated,
    });
    Ok(Comparison { columns, rows })
}

impl Comparison {
    pub fn value(&self, metric: &str, column: &str) -> Option<f64> {
        let c = self.columns.iter().position(|x| x == column)?;
        self.rows.iter().find(|r| r.metric == metric)?.values[c]
    }

    /// Tab-separated; absent cells are empty.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric");
        for c in &self.columns {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.metric);
            for v in &row.values {
                out.push('\t');
                if let Some(v) = v {
                    out.push_str(&fmt_num(*v));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Aligned plain-text table with one decimal, `-` for absent cells.
    pub fn to_text(&self) -> String {
        let cell = |metric: &str, v: &Option<f64>| match v {
            None => "-".to_owned(),
            Some(v) if metric == "# of generated sentences" => format!("{v:.0}"),
            Some(v) if metric == "Success Rate" => format!("{:.1}", v * 100.0),
            Some(v) => format!("{v:.1}"),
        };
        let mut table: Vec<Vec<String>> = vec![std::iter::once(String::new())
            .chain(self.columns.iter().cloned())
            .collect()];
        for row in &self.rows {
            table.push(
                std::iter::once(row.metric.clone())
                    .chain(row.values.iter().map(|v| cell(&row.metric, v)))
                    .collect(),
            );
        }
        let n = table[0].len();
        let widths: Vec<usize> = (0..n)
            .map(|i| table.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &table {
            let line: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    if i == 0 {
                        format!("{s:<w$}", w = widths[i])
                    } else {
                        format!("{s:>w$}", w = widths[i])
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_bins() {
        let lex = AoaLexicon::from_pairs("t", [("denote", 11.24), ("term", 8.28)]);
        let h = aoa_histogram(&["to denote", "a term", "cat"], &lex, 1.0);
        assert_eq!(h.count_at(11.5), 1);
        assert_eq!(h.count_at(8.0), 1);
        assert_eq!(h.unrated, 1);
        assert_eq!(h.total(), 3);
        assert!(h.to_tsv().contains("\n11\t1\n"));
        let empty = aoa_histogram::<&str>(&[], &lex, 1.0);
        assert_eq!(empty.total(), 0);
    }

    #[test]
    fn config_parses_tagged_backend() {
        let cfg = ExperimentConfig::from_toml_str(
            r#"
system = "proposed"
lexicon = "lex.csv"
test_set = "test.jsonl"
[backend]
kind = "chat"
base_url = "http://localhost:8000/v1"
model = "m"
"#,
        )
        .unwrap();
        assert!(matches!(cfg.backend, Some(BackendConfig::Chat(_))));
        assert_eq!(cfg.target_age, 10.0);
        assert_eq!(cfg.max_iterations, 5);
        let err =
            ExperimentConfig::from_toml_str("system = \"initial\"\nlexicon = \"a\"\ntest_set = \"b\"\nbogus = 1\n");
        assert!(err.is_err());
        let err = ExperimentConfig::from_toml_str(
            "system = \"initial\"\nlexicon = \"a\"\ntest_set = \"b\"\n[backend]\nkind = \"mock\"\nsubs = {}\n",
        );
        assert!(err.is_err());
    }
}
