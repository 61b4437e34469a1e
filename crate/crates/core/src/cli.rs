//! Command-line front end.
//!
//! Settings resolve as flags, then `AOA_*` environment variables, then the
//! TOML file given by `--config`. stdout carries only JSON or TSV payloads;
//! logs go to stderr. Exit codes: 0 success, 1 domain or I/O error, 2 usage
//! error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::controller::{
    simplify, simplify_user, SelectionMode, SimplifyOptions, StopReason, DEFAULT_MAX_ITERATIONS, DEFAULT_TARGET_AGE,
};
use crate::dataset::{
    build_examples_checkpointed, extract_sentences, filter_pairs, progress_path, read_corpus, read_jsonl,
    select_target_age, split, write_jsonl, BuildOptions, ChatMtClient, DatasetExample, HttpTranslateClient,
    IdentityMtClient, MtClient,
};
use crate::harness::BackendConfig;
use crate::harness::{aoa_histogram, compare_runs, run_experiment, ExperimentConfig, RunArtifact};
use crate::lexicon::{load_lexicon, AoaLexicon, LexiconFormat};
use crate::rewriter::{ChatBackendConfig, PromptVariant, RewriterBackend};
use crate::service::{serve, Analysis, AppState, ServiceConfig};
use crate::textproc::annotate;

type BoxError = Box<dyn std::error::Error + Send + Sync>;

enum CliError {
    Usage(String),
    Domain(BoxError),
}

impl<E: Into<BoxError>> From<E> for CliError {
    fn from(e: E) -> Self {
        Self::Domain(e.into())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

type CliResult = Result<(), CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "aoa-simplify",
    version,
    about = "Simplify machine translations to a target age of acquisition"
)]
pub struct Cli {
    /// TOML file with defaults for any setting below.
    #[arg(long, global = true, env = "AOA_CONFIG")]
    config: Option<PathBuf>,
    /// Worker threads for batch work.
    #[arg(long, global = true, env = "AOA_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rate every word of a sentence and report its hardest word.
    Analyze(AnalyzeArgs),
    /// Run the simplification loop, or one pass on --words.
    Simplify(SimplifyArgs),
    /// Build, filter, split and select benchmark records.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Run experiments and compare their results.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Start the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct LexiconArgs {
    /// AoA lexicon CSV (word,aoa).
    #[arg(long, env = "AOA_LEXICON")]
    lexicon: Option<PathBuf>,
    #[arg(long, env = "AOA_TARGET_AGE")]
    target_age: Option<f64>,
}

#[derive(Debug, Args)]
struct BackendArgs {
    /// OpenAI-compatible base URL, e.g. http://localhost:8000/v1.
    #[arg(long, env = "AOA_BASE_URL")]
    base_url: Option<String>,
    #[arg(long, env = "AOA_MODEL")]
    model: Option<String>,
    /// Variable holding the bearer token.
    #[arg(long, env = "AOA_API_KEY_ENV")]
    api_key_env: Option<String>,
    /// TOML substitution table for the offline mock backend.
    #[arg(long, env = "AOA_MOCK_TABLE")]
    mock_table: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("what").required(true))]
struct AnalyzeArgs {
    #[arg(long, group = "what")]
    text: Option<String>,
    /// One sentence per line; prints one JSON object per line.
    #[arg(long, group = "what")]
    input: Option<PathBuf>,
    #[command(flatten)]
    lex: LexiconArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Single,
    Multi,
}

#[derive(Debug, Args)]
struct SimplifyArgs {
    #[arg(long)]
    translation: String,
    /// Source-language sentence.
    #[arg(long)]
    source: Option<String>,
    /// Rewrite these words once instead of running the loop.
    #[arg(long, value_delimiter = ',')]
    words: Vec<String>,
    #[arg(long, value_enum, default_value = "single")]
    mode: ModeArg,
    /// proposed, multi_word, direct_translation, no_intermediate, no_word or
    /// no_intermediate_no_word. Defaults to proposed with --source and
    /// no_intermediate without.
    #[arg(long)]
    variant: Option<PromptVariant>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iterations: usize,
    /// Show earlier outputs to the rewriter.
    #[arg(long)]
    history: bool,
    #[command(flatten)]
    lex: LexiconArgs,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Debug, Subcommand)]
enum DatasetCmd {
    /// Back-translate a corpus into records.
    Build(BuildArgs),
    /// Keep records whose AoA difference exceeds a threshold.
    Filter(FilterArgs),
    /// Shuffle and cut records 8:1:1.
    Split(SplitArgs),
    /// Keep records hard at, and solvable below, a target age.
    Select(SelectArgs),
    /// Pull sentences out of a plain-text article dump.
    Extract(ExtractArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MtKind {
    Identity,
    Chat,
    Http,
}

#[derive(Debug, Args)]
struct BuildArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    mt: Option<MtKind>,
    /// Chat endpoint for both directions.
    #[arg(long, env = "AOA_MT_BASE_URL")]
    mt_base_url: Option<String>,
    #[arg(long, env = "AOA_MT_MODEL")]
    mt_model: Option<String>,
    /// HTTP translate endpoint for both directions.
    #[arg(long, env = "AOA_MT_URL")]
    mt_url: Option<String>,
    #[arg(long)]
    pivot: Option<String>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    max_failure_rate: Option<f64>,
    /// Continue from an interrupted run's checkpoint.
    #[arg(long)]
    resume: bool,
    #[command(flatten)]
    lex: LexiconArgs,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Receives train.jsonl, dev.jsonl and test.jsonl.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Defaults to the configured target age.
    #[arg(long)]
    age: Option<f64>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 3)]
    min_words: usize,
}

#[derive(Debug, Subcommand)]
enum EvalCmd {
    /// Run one experiment config.
    Run(RunArgs),
    /// Tabulate run directories side by side.
    Compare(CompareArgs),
    /// Histogram of per-sentence highest AoA.
    Hist(HistArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Experiment TOML.
    experiment: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    label: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TableFormat {
    Tsv,
    Text,
    Json,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(required = true)]
    runs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "tsv")]
    format: TableFormat,
}

#[derive(Debug, Args)]
struct HistArgs {
    #[arg(long)]
    input: PathBuf,
    /// Read this string field from JSON lines instead of plain lines.
    #[arg(long)]
    field: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    bin_width: f64,
    #[command(flatten)]
    lex: LexiconArgs,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "AOA_BIND")]
    bind: Option<String>,
    /// Allowed browser origin; repeatable, `*` for any.
    #[arg(long = "cors-origin", env = "AOA_CORS_ORIGINS", value_delimiter = ',')]
    cors_origins: Vec<String>,
    #[arg(long)]
    session_idle_secs: Option<u64>,
    #[command(flatten)]
    lex: LexiconArgs,
    #[command(flatten)]
    backend: BackendArgs,
}

/// Machine-translation settings for `dataset build`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MtConfig {
    Identity,
    Chat {
        backend: ChatBackendConfig,
        #[serde(default = "default_language")]
        language: String,
        #[serde(default = "default_pivot")]
        pivot: String,
    },
    Http {
        url: String,
        #[serde(default = "default_language")]
        language: String,
        #[serde(default = "default_pivot")]
        pivot: String,
        #[serde(default = "default_http_timeout")]
        timeout_secs: u64,
    },
}

fn default_language() -> String {
    "English".to_owned()
}
fn default_pivot() -> String {
    "Japanese".to_owned()
}
fn default_http_timeout() -> u64 {
    60
}

/// Contents of the `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub lexicon: Option<PathBuf>,
    pub target_age: Option<f64>,
    pub jobs: Option<usize>,
    pub backend: Option<BackendConfig>,
    pub mt: Option<MtConfig>,
    pub service: Option<ServiceConfig>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: CliConfig = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        if let (Some(dir), Some(lex)) = (path.parent(), cfg.lexicon.as_mut()) {
            if lex.is_relative() {
                *lex = dir.join(&*lex);
            }
        }
        Ok(cfg)
    }
}

/// Settings after merging flags, environment and config file.
#[derive(Debug, Serialize)]
struct Resolved {
    lexicon: Option<PathBuf>,
    target_age: f64,
    jobs: usize,
}

struct Ctx {
    file: CliConfig,
    resolved: Resolved,
}

impl Ctx {
    fn new(cli_config: Option<&Path>, jobs: Option<usize>) -> Result<Self, CliError> {
        let file = match cli_config {
            Some(p) => CliConfig::load(p).map_err(usage)?,
            None => CliConfig::default(),
        };
        let jobs = jobs.or(file.jobs).unwrap_or(1);
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        Ok(Self {
            resolved: Resolved {
                lexicon: file.lexicon.clone(),
                target_age: file.target_age.unwrap_or(DEFAULT_TARGET_AGE),
                jobs,
            },
            file,
        })
    }

    fn apply_lex(&mut self, args: &LexiconArgs) -> CliResult {
        if let Some(p) = &args.lexicon {
            self.resolved.lexicon = Some(p.clone());
        }
        if let Some(a) = args.target_age {
            self.resolved.target_age = a;
        }
        if !(self.resolved.target_age > 0.0 && self.resolved.target_age.is_finite()) {
            return Err(usage("--target-age must be positive"));
        }
        log::info!(
            "resolved config: {}",
            serde_json::to_string(&self.resolved).unwrap_or_default()
        );
        Ok(())
    }

    fn lexicon(&self) -> Result<AoaLexicon, CliError> {
        let path = self
            .resolved
            .lexicon
            .as_ref()
            .ok_or_else(|| usage("no lexicon given (use --lexicon, AOA_LEXICON or the config file)"))?;
        Ok(load_lexicon(path, LexiconFormat::Csv)?)
    }

    fn backend(&self, args: &BackendArgs) -> Result<Arc<dyn RewriterBackend>, CliError> {
        let cfg = if let Some(url) = &args.base_url {
            let model = args.model.clone().ok_or_else(|| usage("--base-url needs --model"))?;
            let mut chat = ChatBackendConfig::new(url.clone(), model);
            if let Some(env) = &args.api_key_env {
                chat.api_key_env = env.clone();
            }
            BackendConfig::Chat(chat)
        } else if let Some(path) = &args.mock_table {
            load_mock_table(path)?
        } else {
            self.file.backend.clone().ok_or_else(|| {
                usage("no backend configured (use --base-url, --mock-table or [backend] in the config file)")
            })?
        };
        Ok(cfg.build())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MockTable {
    #[serde(default)]
    substitutions: BTreeMap<String, String>,
    #[serde(default)]
    sentences: BTreeMap<String, String>,
}

fn load_mock_table(path: &Path) -> Result<BackendConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let t: MockTable = toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(BackendConfig::Mock {
        substitutions: t.substitutions,
        sentences: t.sentences,
    })
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = e.print();
                    2
                }
            };
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(CliError::Domain(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> CliResult {
    let mut ctx = Ctx::new(cli.config.as_deref(), cli.jobs)?;
    match cli.command {
        Command::Analyze(a) => analyze(&mut ctx, a, out),
        Command::Simplify(a) => simplify_cmd(&mut ctx, a, out),
        Command::Dataset(d) => dataset(&mut ctx, d, out),
        Command::Eval(e) => eval(&mut ctx, e, out),
        Command::Serve(a) => serve_cmd(&mut ctx, a),
    }
}

fn analyze(ctx: &mut Ctx, a: AnalyzeArgs, out: &mut dyn Write) -> CliResult {
    ctx.apply_lex(&a.lex)?;
    let lex = ctx.lexicon()?;
    let texts = match (a.text, a.input) {
        (Some(t), _) => vec![t],
        (None, Some(p)) => read_corpus(&p)?,
        (None, None) => unreachable!("clap requires one input"),
    };
    for t in texts {
        if t.trim().is_empty() {
            return Err(usage("--text must not be empty"));
        }
        emit(out, &Analysis::new(annotate(&lex, &t), ctx.resolved.target_age))?;
    }
    Ok(())
}

fn simplify_cmd(ctx: &mut Ctx, a: SimplifyArgs, out: &mut dyn Write) -> CliResult {
    ctx.apply_lex(&a.lex)?;
    if a.max_iterations == 0 {
        return Err(usage("--max-iterations must be at least 1"));
    }
    let lex = ctx.lexicon()?;
    let backend = ctx.backend(&a.backend)?;
    let source = a.source.as_deref();
    let opts = SimplifyOptions {
        target_age: ctx.resolved.target_age,
        mode: match a.mode {
            ModeArg::Single => SelectionMode::Single,
            ModeArg::Multi => SelectionMode::Multi,
        },
        variant: a.variant.unwrap_or(if source.is_some() {
            PromptVariant::Proposed
        } else {
            PromptVariant::NoIntermediate
        }),
        max_iterations: a.max_iterations,
        include_history: a.history,
        ..SimplifyOptions::default()
    };
    let res = if a.words.is_empty() {
        simplify(&a.translation, source, &lex, &*backend, &opts)?
    } else {
        simplify_user(&a.translation, source, &a.words, &lex, &*backend, &opts)?
    };
    emit(out, &res)?;
    if res.stop_reason == StopReason::BackendFailure {
        return Err(CliError::Domain(
            res.error.unwrap_or_else(|| "backend failure".into()).into(),
        ));
    }
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<DatasetExample>, CliError> {
    Ok(read_jsonl(path)?)
}

fn write_if(path: Option<&Path>, records: &[DatasetExample]) -> CliResult {
    if let Some(p) = path {
        write_jsonl(p, records)?;
    }
    Ok(())
}

fn dataset(ctx: &mut Ctx, cmd: DatasetCmd, out: &mut dyn Write) -> CliResult {
    match cmd {
        DatasetCmd::Build(a) => build(ctx, a, out),
        DatasetCmd::Filter(a) => {
            if a.threshold < 0.0 {
                return Err(usage("--threshold must be non-negative"));
            }
            let records = read_records(&a.input)?;
            let kept = filter_pairs(&records, a.threshold);
            write_if(a.output.as_deref(), &kept)?;
            emit(
                out,
                &serde_json::json!({ "kept": kept.len(), "dropped": records.len() - kept.len(), "threshold": a.threshold }),
            )
        }
        DatasetCmd::Split(a) => {
            let records = read_records(&a.input)?;
            let parts = split(&records, a.seed)?;
            fs::create_dir_all(&a.out_dir)?;
            write_jsonl(&a.out_dir.join("train.jsonl"), &parts.train)?;
            write_jsonl(&a.out_dir.join("dev.jsonl"), &parts.dev)?;
            write_jsonl(&a.out_dir.join("test.jsonl"), &parts.test)?;
            emit(
                out,
                &serde_json::json!({
                    "train": parts.train.len(),
                    "dev": parts.dev.len(),
                    "test": parts.test.len(),
                    "seed": a.seed,
                }),
            )
        }
        DatasetCmd::Select(a) => {
            let age = a.age.unwrap_or(ctx.resolved.target_age);
            if age.is_nan() || age <= 0.0 {
                return Err(usage("--age must be positive"));
            }
            let records = read_records(&a.input)?;
            let kept = select_target_age(&records, age);
            write_if(a.output.as_deref(), &kept)?;
            emit(
                out,
                &serde_json::json!({ "kept": kept.len(), "dropped": records.len() - kept.len(), "age": age }),
            )
        }
        DatasetCmd::Extract(a) => {
            let text = fs::read_to_string(&a.input)?;
            let sentences = extract_sentences(&text, a.min_words);
            let mut body = sentences.join("\n");
            body.push('\n');
            fs::write(&a.output, body)?;
            emit(out, &serde_json::json!({ "sentences": sentences.len() }))
        }
    }
}

type MtPair = (Box<dyn MtClient>, Box<dyn MtClient>);

fn mt_clients(ctx: &Ctx, a: &BuildArgs) -> Result<MtPair, CliError> {
    let pivot = a.pivot.clone();
    let cfg = match a.mt {
        Some(MtKind::Identity) => MtConfig::Identity,
        Some(MtKind::Chat) | None if a.mt_base_url.is_some() => MtConfig::Chat {
            backend: ChatBackendConfig::new(
                a.mt_base_url.clone().unwrap_or_default(),
                a.mt_model
                    .clone()
                    .ok_or_else(|| usage("--mt-base-url needs --mt-model"))?,
            ),
            language: default_language(),
            pivot: pivot.clone().unwrap_or_else(default_pivot),
        },
        Some(MtKind::Http) | None if a.mt_url.is_some() => MtConfig::Http {
            url: a.mt_url.clone().unwrap_or_default(),
            language: default_language(),
            pivot: pivot.clone().unwrap_or_else(default_pivot),
            timeout_secs: default_http_timeout(),
        },
        Some(kind) => match ctx.file.mt.clone() {
            Some(cfg) => cfg,
            None => {
                return Err(usage(format!(
                    "--mt {kind:?} needs endpoint flags or an [mt] config section"
                )))
            }
        },
        None => ctx
            .file
            .mt
            .clone()
            .ok_or_else(|| usage("no MT configured (use --mt, --mt-base-url, --mt-url or [mt])"))?,
    };
    Ok(match cfg {
        MtConfig::Identity => (Box::new(IdentityMtClient), Box::new(IdentityMtClient)),
        MtConfig::Chat {
            backend,
            language,
            pivot,
        } => (
            Box::new(ChatMtClient::new(backend.clone(), language.clone(), pivot.clone())),
            Box::new(ChatMtClient::new(backend, pivot, language)),
        ),
        MtConfig::Http {
            url,
            language,
            pivot,
            timeout_secs,
        } => {
            let t = Duration::from_secs(timeout_secs);
            (
                Box::new(HttpTranslateClient::new(
                    url.clone(),
                    language.clone(),
                    pivot.clone(),
                    t,
                )),
                Box::new(HttpTranslateClient::new(url, pivot, language, t)),
            )
        }
    })
}

fn build(ctx: &mut Ctx, a: BuildArgs, out: &mut dyn Write) -> CliResult {
    ctx.apply_lex(&a.lex)?;
    let lex = ctx.lexicon()?;
    let (fwd, bwd) = mt_clients(ctx, &a)?;
    let mut opts = BuildOptions {
        jobs: ctx.resolved.jobs,
        ..BuildOptions::default()
    };
    if let Some(n) = a.checkpoint_every {
        opts.checkpoint_every = n;
    }
    if let Some(r) = a.max_failure_rate {
        opts.max_failure_rate = r;
    }
    let corpus = read_corpus(&a.corpus)?;
    let sidecar = progress_path(&a.output);
    if !a.resume && sidecar.exists() {
        fs::remove_file(&sidecar)?;
    }
    let outcome = build_examples_checkpointed(&corpus, &*fwd, &*bwd, &lex, &opts, &a.output)?;
    emit(
        out,
        &serde_json::json!({
            "examples": outcome.examples.len(),
            "failures": outcome.failures,
            "output": a.output,
        }),
    )
}

fn eval(ctx: &mut Ctx, cmd: EvalCmd, out: &mut dyn Write) -> CliResult {
    match cmd {
        EvalCmd::Run(a) => {
            let mut cfg = ExperimentConfig::load(&a.experiment).map_err(|e| usage(e.to_string()))?;
            if let Some(dir) = a.output_dir {
                cfg.output_dir = dir;
            }
            if let Some(label) = a.label {
                cfg.label = Some(label);
            }
            cfg.jobs = ctx.resolved.jobs;
            log::info!("experiment: {}", serde_json::to_string(&cfg).unwrap_or_default());
            let art = run_experiment(&cfg)?;
            emit(out, &art)
        }
        EvalCmd::Compare(a) => {
            let runs = a
                .runs
                .iter()
                .map(|d| RunArtifact::load(d))
                .collect::<Result<Vec<_>, _>>()?;
            let table = compare_runs(&runs)?;
            match a.format {
                TableFormat::Tsv => out.write_all(table.to_tsv().as_bytes())?,
                TableFormat::Text => out.write_all(table.to_text().as_bytes())?,
                TableFormat::Json => emit(out, &table)?,
            }
            Ok(())
        }
        EvalCmd::Hist(a) => {
            ctx.apply_lex(&a.lex)?;
            if a.bin_width.is_nan() || a.bin_width <= 0.0 {
                return Err(usage("--bin-width must be positive"));
            }
            let lex = ctx.lexicon()?;
            let texts: Vec<String> = match &a.field {
                None => read_corpus(&a.input)?,
                Some(field) => read_jsonl::<serde_json::Value>(&a.input)?
                    .into_iter()
                    .map(|v| {
                        v.get(field)
                            .and_then(|s| s.as_str())
                            .map(str::to_owned)
                            .ok_or_else(|| usage(format!("record without a string field {field:?}")))
                    })
                    .collect::<Result<_, _>>()?,
            };
            out.write_all(aoa_histogram(&texts, &lex, a.bin_width).to_tsv().as_bytes())?;
            Ok(())
        }
    }
}

fn serve_cmd(ctx: &mut Ctx, a: ServeArgs) -> CliResult {
    ctx.apply_lex(&a.lex)?;
    let lex = Arc::new(ctx.lexicon()?);
    let backend = ctx.backend(&a.backend)?;
    let mut cfg = ctx.file.service.clone().unwrap_or_default();
    if let Some(b) = a.bind {
        cfg.bind = b;
    }
    if !a.cors_origins.is_empty() {
        cfg.cors_origins = a.cors_origins;
    }
    if let Some(s) = a.session_idle_secs {
        cfg.session_idle_secs = s;
    }
    log::info!("service config: {}", serde_json::to_string(&cfg).unwrap_or_default());
    let state = Arc::new(AppState::new(lex, backend, &cfg));
    let rt = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(ctx.resolved.jobs.max(2))
        .enable_all()
        .build()?;
    rt.block_on(serve(state, &cfg))?;
    Ok(())
}
