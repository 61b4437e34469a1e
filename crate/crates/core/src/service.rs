//! JSON-over-HTTP API for the interactive workbench and for scripts.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `POST /analyze` | `{text, target_age?}` | tokens with spans and AoA, `max_word`, `success` |
//! | `POST /simplify` | `{source?, translation, target_age?, mode?, variant?, max_iterations?}` | the controller's result; 502 with the partial trace on backend failure |
//! | `POST /simplify/step` | `{session?, source?, translation, words, target_age?}` | one user-directed rewrite plus fresh analysis |
//! | `GET /sessions/{id}` | | the session's step trace |
//! | `GET /healthz` | | `{"status": "ok"}` |
//!
//! Errors come back as `{"error": "..."}` with a 4xx/5xx status.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};
use uuid::Uuid;

use crate::controller::{
    simplify, simplify_user, ControllerError, IterationRecord, SelectionMode, SimplifyOptions, SimplifyResult,
    StopReason, DEFAULT_MAX_ITERATIONS, DEFAULT_TARGET_AGE,
};
use crate::lexicon::AoaLexicon;
use crate::rewriter::{PromptVariant, RetryPolicy, RewriterBackend};
use crate::textproc::{annotate, AnalyzedSentence, TextError, Token};

fn default_bind() -> String {
    "127.0.0.1:8080".to_owned()
}
fn default_idle() -> u64 {
    1800
}
fn default_iteration_cap() -> usize {
    DEFAULT_MAX_ITERATIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    /// Allowed browser origins; `*` allows any.
    #[serde(default)]
    pub cors_origins: Vec<String>,
    /// Sessions untouched for this long are dropped.
    #[serde(default = "default_idle")]
    pub session_idle_secs: u64,
    /// Upper bound on `max_iterations` a request may ask for.
    #[serde(default = "default_iteration_cap")]
    pub max_iterations_cap: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: default_bind(),
            cors_origins: Vec::new(),
            session_idle_secs: default_idle(),
            max_iterations_cap: default_iteration_cap(),
        }
    }
}

/// Short-lived history of user-directed steps.
#[derive(Debug, Clone, Serialize)]
pub struct ApiSession {
    pub id: Uuid,
    pub source: Option<String>,
    pub sentence: String,
    pub target_age: f64,
    pub trace: Vec<IterationRecord>,
    #[serde(skip)]
    created: Instant,
    #[serde(skip)]
    last_used: Instant,
    #[serde(skip)]
    in_flight: bool,
}

impl ApiSession {
    pub fn age(&self) -> Duration {
        self.created.elapsed()
    }
}

pub struct AppState {
    lexicon: Arc<AoaLexicon>,
    backend: Arc<dyn RewriterBackend>,
    sessions: Mutex<HashMap<Uuid, ApiSession>>,
    idle: Duration,
    iteration_cap: usize,
    retry: RetryPolicy,
}

impl AppState {
    pub fn new(lexicon: Arc<AoaLexicon>, backend: Arc<dyn RewriterBackend>, cfg: &ServiceConfig) -> Self {
        Self {
            lexicon,
            backend,
            sessions: Mutex::new(HashMap::new()),
            idle: Duration::from_secs(cfg.session_idle_secs),
            iteration_cap: cfg.max_iterations_cap.max(1),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Overrides the idle timeout (tests use very short ones).
    pub fn with_idle_timeout(mut self, idle: Duration) -> Self {
        self.idle = idle;
        self
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session lock").len()
    }

    fn sweep(&self, sessions: &mut HashMap<Uuid, ApiSession>) {
        let idle = self.idle;
        sessions.retain(|_, s| s.in_flight || s.last_used.elapsed() < idle);
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            body: json!({ "error": message.into() }),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<ControllerError> for ApiError {
    fn from(e: ControllerError) -> Self {
        match &e {
            ControllerError::Text(TextError::WordNotFound(w)) => Self {
                status: StatusCode::BAD_REQUEST,
                body: json!({ "error": e.to_string(), "word": w }),
            },
            _ => Self::bad_request(e.to_string()),
        }
    }
}

fn join_error(e: tokio::task::JoinError) -> ApiError {
    ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("worker failed: {e}"))
}

fn check_age(age: Option<f64>) -> Result<f64, ApiError> {
    let age = age.unwrap_or(DEFAULT_TARGET_AGE);
    if age > 0.0 && age.is_finite() {
        Ok(age)
    } else {
        Err(ApiError::bad_request("target_age must be a positive number"))
    }
}

#[derive(Debug, Deserialize)]
pub struct AnalyzeRequest {
    pub text: String,
    #[serde(default)]
    pub target_age: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MaxWord {
    pub surface: String,
    pub aoa: f64,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub text: String,
    pub target_age: f64,
    pub tokens: Vec<Token>,
    pub max_word: Option<MaxWord>,
    pub success: bool,
}

impl Analysis {
    pub fn new(analyzed: AnalyzedSentence, target_age: f64) -> Self {
        let success = analyzed.is_below(target_age);
        let max_word = analyzed.max_token().and_then(|t| {
            t.aoa.map(|aoa| MaxWord {
                surface: t.surface.clone(),
                aoa,
                start: t.start,
                end: t.end,
            })
        });
        Self {
            text: analyzed.text,
            target_age,
            tokens: analyzed.tokens,
            max_word,
            success,
        }
    }
}

async fn analyze(State(st): State<Arc<AppState>>, Json(req): Json<AnalyzeRequest>) -> Result<Json<Analysis>, ApiError> {
    if req.text.trim().is_empty() {
        return Err(ApiError::bad_request("text must not be empty"));
    }
    let age = check_age(req.target_age)?;
    Ok(Json(Analysis::new(annotate(&st.lexicon, &req.text), age)))
}

#[derive(Debug, Deserialize)]
pub struct SimplifyApiRequest {
    #[serde(default)]
    pub source: Option<String>,
    pub translation: String,
    #[serde(default)]
    pub target_age: Option<f64>,
    #[serde(default)]
    pub mode: SelectionMode,
    /// Defaults to `proposed` with a source and `no_intermediate` without.
    #[serde(default)]
    pub variant: Option<PromptVariant>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

fn pick_variant(requested: Option<PromptVariant>, source: Option<&str>) -> PromptVariant {
    requested.unwrap_or(if source.is_some() {
        PromptVariant::Proposed
    } else {
        PromptVariant::NoIntermediate
    })
}

async fn simplify_handler(State(st): State<Arc<AppState>>, Json(req): Json<SimplifyApiRequest>) -> Response {
    match run_simplify(st, req).await {
        Ok(res) if res.stop_reason == StopReason::BackendFailure => {
            (StatusCode::BAD_GATEWAY, Json(res)).into_response()
        }
        Ok(res) => Json(res).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn run_simplify(st: Arc<AppState>, req: SimplifyApiRequest) -> Result<SimplifyResult, ApiError> {
    let target_age = check_age(req.target_age)?;
    let max_iterations = req.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS);
    if max_iterations == 0 || max_iterations > st.iteration_cap {
        return Err(ApiError::bad_request(format!(
            "max_iterations must lie in 1..={}",
            st.iteration_cap
        )));
    }
    let source = req.source.filter(|s| !s.trim().is_empty());
    let opts = SimplifyOptions {
        target_age,
        mode: req.mode,
        variant: pick_variant(req.variant, source.as_deref()),
        max_iterations,
        include_history: false,
        retry: st.retry,
    };
    let translation = req.translation;
    tokio::task::spawn_blocking(move || simplify(&translation, source.as_deref(), &st.lexicon, &*st.backend, &opts))
        .await
        .map_err(join_error)?
        .map_err(ApiError::from)
}

#[derive(Debug, Deserialize)]
pub struct StepRequest {
    #[serde(default)]
    pub session: Option<Uuid>,
    #[serde(default)]
    pub source: Option<String>,
    pub translation: String,
    pub words: Vec<String>,
    #[serde(default)]
    pub target_age: Option<f64>,
    #[serde(default)]
    pub variant: Option<PromptVariant>,
}

#[derive(Debug, Serialize)]
pub struct StepResponse {
    pub session: Uuid,
    pub output_sentence: String,
    pub step: IterationRecord,
    pub stop_reason: StopReason,
    pub trace_len: usize,
    pub analysis: Analysis,
}

/// Clears the in-flight flag even if the handler bails out early.
struct InFlight {
    state: Arc<AppState>,
    id: Uuid,
}

impl Drop for InFlight {
    fn drop(&mut self) {
        if let Ok(mut sessions) = self.state.sessions.lock() {
            if let Some(s) = sessions.get_mut(&self.id) {
                s.in_flight = false;
                s.last_used = Instant::now();
            }
        }
    }
}

async fn step(State(st): State<Arc<AppState>>, Json(req): Json<StepRequest>) -> Result<Response, ApiError> {
    if req.translation.trim().is_empty() {
        return Err(ApiError::bad_request("translation must not be empty"));
    }
    if req.words.is_empty() {
        return Err(ApiError::bad_request("words must not be empty"));
    }
    let target_age = check_age(req.target_age)?;
    let source = req.source.filter(|s| !s.trim().is_empty());
    let id = {
        let mut sessions = st.sessions.lock().expect("session lock");
        st.sweep(&mut sessions);
        match req.session {
            Some(id) => {
                let s = sessions
                    .get_mut(&id)
                    .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown or expired session {id}")))?;
                if s.in_flight {
                    return Err(ApiError::new(
                        StatusCode::CONFLICT,
                        "a rewrite is already running for this session",
                    ));
                }
                s.in_flight = true;
                id
            }
            None => {
                let id = Uuid::new_v4();
                let now = Instant::now();
                sessions.insert(
                    id,
                    ApiSession {
                        id,
                        source: source.clone(),
                        sentence: req.translation.clone(),
                        target_age,
                        trace: Vec::new(),
                        created: now,
                        last_used: now,
                        in_flight: true,
                    },
                );
                id
            }
        }
    };
    let guard = InFlight { state: st.clone(), id };
    let opts = SimplifyOptions {
        target_age,
        variant: pick_variant(req.variant, source.as_deref()),
        max_iterations: 1,
        retry: st.retry,
        ..SimplifyOptions::default()
    };
    let worker = st.clone();
    let translation = req.translation.clone();
    let words = req.words;
    let result = tokio::task::spawn_blocking(move || {
        simplify_user(
            &translation,
            source.as_deref(),
            &words,
            &worker.lexicon,
            &*worker.backend,
            &opts,
        )
    })
    .await
    .map_err(join_error)??;
    if result.stop_reason == StopReason::BackendFailure {
        let body = json!({
            "error": result.error.clone().unwrap_or_else(|| "backend failure".into()),
            "stop_reason": result.stop_reason,
            "session": id,
        });
        return Ok((StatusCode::BAD_GATEWAY, Json(body)).into_response());
    }
    let record = result.iterations.into_iter().next().expect("one step on success");
    let trace_len = {
        let mut sessions = st.sessions.lock().expect("session lock");
        let s = sessions.get_mut(&id).expect("in-flight sessions are never swept");
        s.sentence = record.output_sentence.clone();
        s.target_age = target_age;
        s.trace.push(record.clone());
        s.trace.len()
    };
    drop(guard);
    let analysis = Analysis::new(annotate(&st.lexicon, &record.output_sentence), target_age);
    Ok(Json(StepResponse {
        session: id,
        output_sentence: record.output_sentence.clone(),
        stop_reason: result.stop_reason,
        step: record,
        trace_len,
        analysis,
    })
    .into_response())
}

async fn get_session(State(st): State<Arc<AppState>>, Path(id): Path<Uuid>) -> Result<Json<ApiSession>, ApiError> {
    let mut sessions = st.sessions.lock().expect("session lock");
    st.sweep(&mut sessions);
    sessions
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown or expired session {id}")))
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

fn cors_layer(origins: &[String]) -> Option<CorsLayer> {
    if origins.is_empty() {
        return None;
    }
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    if origins.iter().any(|o| o == "*") {
        return Some(layer.allow_origin(Any));
    }
    let values: Vec<HeaderValue> = origins
        .iter()
        .filter_map(|o| match HeaderValue::from_str(o) {
            Ok(v) => Some(v),
            Err(_) => {
                log::warn!("ignoring invalid CORS origin {o:?}");
                None
            }
        })
        .collect();
    Some(layer.allow_origin(AllowOrigin::list(values)))
}

pub fn router(state: Arc<AppState>, cfg: &ServiceConfig) -> Router {
    let app = Router::new()
        .route("/analyze", post(analyze))
        .route("/simplify", post(simplify_handler))
        .route("/simplify/step", post(step))
        .route("/sessions/{id}", get(get_session))
        .route("/healthz", get(healthz))
        .with_state(state);
    match cors_layer(&cfg.cors_origins) {
        Some(cors) => app.layer(cors),
        None => app,
    }
}

/// Binds `cfg.bind` and serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, cfg: &ServiceConfig) -> std::io::Result<()> {
    let addr: SocketAddr = cfg
        .bind
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("bind {:?}: {e}", cfg.bind)))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, cfg))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
