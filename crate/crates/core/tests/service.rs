mod common;

use std::sync::Arc;
use std::time::Duration;

use aoa_simplify::rewriter::{BackendError, FnBackend, MockBackend, RetryPolicy, RewriterBackend};
use aoa_simplify::service::{router, AppState, ServiceConfig};
use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use common::*;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app_with(backend: Arc<dyn RewriterBackend>, cfg: &ServiceConfig) -> (Router, Arc<AppState>) {
    let state = Arc::new(
        AppState::new(Arc::new(sample_lexicon()), backend, cfg)
            .with_retry(RetryPolicy::NONE)
            .with_idle_timeout(Duration::from_secs(60)),
    );
    (router(state.clone(), cfg), state)
}

fn app() -> Router {
    let backend = success_mock().with_sentences([(cap_example::INITIAL, cap_example::ITER[0])]);
    app_with(Arc::new(backend), &ServiceConfig::default()).0
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

#[tokio::test]
async fn healthz_is_ok() {
    let (status, body) = call(&app(), Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
}

#[tokio::test]
async fn analyze_reports_the_hardest_word() {
    let (status, body) = call(
        &app(),
        Method::POST,
        "/analyze",
        Some(json!({ "text": success_example::INITIAL })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["max_word"]["surface"], "denote");
    assert_eq!(body["max_word"]["aoa"], 11.24);
    assert_eq!(body["success"], false);
    assert_eq!(body["target_age"], 10.0);
    let start = body["max_word"]["start"].as_u64().unwrap() as usize;
    let end = body["max_word"]["end"].as_u64().unwrap() as usize;
    let chars: Vec<char> = success_example::INITIAL.chars().collect();
    assert_eq!(chars[start..end].iter().collect::<String>(), "denote");
    let rated: Vec<&Value> = body["tokens"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|t| t.get("aoa").is_some())
        .collect();
    assert_eq!(rated.len(), 2);

    let (_, body) = call(
        &app(),
        Method::POST,
        "/analyze",
        Some(json!({ "text": success_example::INITIAL, "target_age": 12.0 })),
    )
    .await;
    assert_eq!(body["success"], true);
}

#[tokio::test]
async fn analyze_rejects_bad_input() {
    let (status, body) = call(&app(), Method::POST, "/analyze", Some(json!({ "text": "  " }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());
    let (status, _) = call(
        &app(),
        Method::POST,
        "/analyze",
        Some(json!({ "text": "x", "target_age": -1.0 })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app(), Method::POST, "/analyze", Some(json!({ "nope": 1 }))).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn simplify_runs_the_loop() {
    let body = json!({ "source": success_example::SOURCE, "translation": success_example::INITIAL });
    let (status, res) = call(&app(), Method::POST, "/simplify", Some(body)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(res["success"], true);
    assert_eq!(res["stop_reason"], "success");
    assert_eq!(res["final_sentence"], success_example::ITER2);
    assert_eq!(res["iterations"].as_array().unwrap().len(), 2);

    let capped = json!({ "translation": success_example::INITIAL, "max_iterations": 1 });
    let (_, res) = call(&app(), Method::POST, "/simplify", Some(capped)).await;
    assert_eq!(res["stop_reason"], "iteration_cap");

    let too_many = json!({ "translation": success_example::INITIAL, "max_iterations": 50 });
    let (status, _) = call(&app(), Method::POST, "/simplify", Some(too_many)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let needs_source = json!({ "translation": success_example::INITIAL, "variant": "proposed" });
    let (status, _) = call(&app(), Method::POST, "/simplify", Some(needs_source)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn step_with_unknown_word_names_it() {
    let body = json!({ "translation": success_example::INITIAL, "words": ["banana"] });
    let (status, res) = call(&app(), Method::POST, "/simplify/step", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(res["word"], "banana");
    assert!(res["error"].as_str().unwrap().contains("banana"));
}

#[tokio::test]
async fn steps_accumulate_in_a_session() {
    let backend = MockBackend::new([("certain".into(), "some".into()), ("denote".into(), "show".into())].into());
    let (app, state) = app_with(Arc::new(backend), &ServiceConfig::default());
    let first =
        json!({ "source": success_example::SOURCE, "translation": success_example::INITIAL, "words": ["denote"] });
    let (status, res) = call(&app, Method::POST, "/simplify/step", Some(first)).await;
    assert_eq!(status, StatusCode::OK, "{res}");
    let session = res["session"].as_str().unwrap().to_owned();
    let after_one = res["output_sentence"].as_str().unwrap().to_owned();
    assert!(after_one.contains("to show certain"));
    assert_eq!(res["trace_len"], 1);
    assert_eq!(res["analysis"]["success"], true);
    assert_eq!(res["stop_reason"], "success");

    let second = json!({ "session": session, "source": success_example::SOURCE, "translation": after_one, "words": ["certain"] });
    let (status, res) = call(&app, Method::POST, "/simplify/step", Some(second)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(res["trace_len"], 2);
    assert!(res["output_sentence"].as_str().unwrap().contains("show some songs"));

    let (status, res) = call(&app, Method::GET, &format!("/sessions/{session}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(res["trace"].as_array().unwrap().len(), 2);
    assert_eq!(state.session_count(), 1);

    let unknown = json!({ "session": uuid::Uuid::nil(), "translation": "x", "words": ["x"] });
    let (status, _) = call(&app, Method::POST, "/simplify/step", Some(unknown)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_expire_when_idle() {
    let cfg = ServiceConfig::default();
    let state = Arc::new(
        AppState::new(Arc::new(sample_lexicon()), Arc::new(MockBackend::identity()), &cfg)
            .with_idle_timeout(Duration::from_millis(20)),
    );
    let app = router(state.clone(), &cfg);
    let body = json!({ "translation": success_example::INITIAL, "words": ["denote"] });
    let (_, res) = call(&app, Method::POST, "/simplify/step", Some(body)).await;
    let session = res["session"].as_str().unwrap().to_owned();
    tokio::time::sleep(Duration::from_millis(50)).await;
    let (status, _) = call(&app, Method::GET, &format!("/sessions/{session}"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(state.session_count(), 0);
}

#[tokio::test]
async fn backend_failure_is_a_bad_gateway() {
    let failing = FnBackend::new(|_: &str| Err(BackendError::Timeout));
    let (app, _) = app_with(Arc::new(failing), &ServiceConfig::default());
    let body = json!({ "translation": success_example::INITIAL, "words": ["denote"] });
    let (status, res) = call(&app, Method::POST, "/simplify/step", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(res["stop_reason"], "backend_failure");
    assert!(res["session"].is_string());

    let body = json!({ "translation": success_example::INITIAL });
    let (status, res) = call(&app, Method::POST, "/simplify", Some(body)).await;
    assert_eq!(status, StatusCode::BAD_GATEWAY);
    assert_eq!(res["final_sentence"], success_example::INITIAL);
}

#[tokio::test]
async fn cors_allows_configured_origin() {
    let cfg = ServiceConfig {
        cors_origins: vec!["http://localhost:5173".into()],
        ..Default::default()
    };
    let (app, _) = app_with(Arc::new(MockBackend::identity()), &cfg);
    let req = Request::builder()
        .method(Method::OPTIONS)
        .uri("/analyze")
        .header(header::ORIGIN, "http://localhost:5173")
        .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert_eq!(
        resp.headers().get(header::ACCESS_CONTROL_ALLOW_ORIGIN).unwrap(),
        "http://localhost:5173"
    );
}
