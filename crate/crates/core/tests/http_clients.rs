//! HTTP clients against an in-process fake server.

mod common;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use aoa_simplify::controller::{simplify, SimplifyOptions, StopReason};
use aoa_simplify::dataset::{ChatMtClient, HttpTranslateClient, MtClient};
use aoa_simplify::metrics::{ExternalScorer, HttpScorer};
use aoa_simplify::rewriter::{
    BackendError, ChatBackend, ChatBackendConfig, FnBackend, PromptVariant, RetryPolicy, RewriterBackend,
};
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use common::*;
use serde_json::{json, Value};

type Handler = Arc<dyn Fn(Value) -> (u16, Value) + Send + Sync>;

/// Serves every POST with `handler` and records request bodies. Returns the
/// base URL.
fn spawn_server(handler: Handler) -> (String, Arc<Mutex<Vec<Value>>>) {
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let app = Router::new().fallback(post(move |Json(body): Json<Value>| {
                let handler = handler.clone();
                let log = log.clone();
                async move {
                    log.lock().unwrap().push(body.clone());
                    let (code, reply) = handler(body);
                    (StatusCode::from_u16(code).unwrap(), Json(reply))
                }
            }));
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    (format!("http://{addr}"), seen)
}

fn chat_reply(content: &str) -> Value {
    json!({ "choices": [{ "message": { "role": "assistant", "content": content } }] })
}

fn config(base: &str) -> ChatBackendConfig {
    let mut cfg = ChatBackendConfig::new(format!("{base}/v1/"), "test-model");
    cfg.api_key_env = "AOA_TEST_KEY_THAT_IS_NOT_SET".into();
    cfg.timeout_secs = 5;
    cfg
}

#[test]
fn chat_backend_drives_the_loop() {
    let handler: Handler = Arc::new(|body: Value| {
        let prompt = body["messages"][0]["content"].as_str().unwrap().to_owned();
        if prompt.contains("<edit>denote<edit>") {
            (
                200,
                chat_reply(&format!("{}\n\nextra commentary", success_example::ITER1)),
            )
        } else {
            (200, chat_reply(success_example::ITER2))
        }
    });
    let (base, seen) = spawn_server(handler);
    let backend = ChatBackend::new(config(&base));
    let lex = sample_lexicon();
    let res = simplify(
        success_example::INITIAL,
        Some(success_example::SOURCE),
        &lex,
        &backend,
        &SimplifyOptions::default(),
    )
    .unwrap();
    assert_eq!(res.stop_reason, StopReason::Success);
    assert_eq!(res.iterations[0].output_sentence, success_example::ITER1);
    assert_eq!(res.final_sentence, success_example::ITER2);

    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 2);
    assert_eq!(seen[0]["model"], "test-model");
    assert_eq!(seen[0]["temperature"], 0.0);
    assert_eq!(seen[0]["n"], 1);
    assert_eq!(seen[0]["messages"][0]["role"], "user");
    assert_eq!(backend.describe()["model"], "test-model");
}

#[test]
fn chat_backend_maps_errors() {
    let handler: Handler = Arc::new(|body: Value| match body["messages"][0]["content"].as_str() {
        Some("status") => (503, json!({ "error": "busy" })),
        Some("empty") => (200, json!({ "choices": [] })),
        _ => (200, json!({ "unexpected": true })),
    });
    let (base, seen) = spawn_server(handler);
    let backend = ChatBackend::new(config(&base));
    assert_eq!(backend.complete("status"), Err(BackendError::Status { code: 503 }));
    assert!(matches!(backend.complete("empty"), Err(BackendError::Malformed(_))));
    assert!(matches!(backend.complete("other"), Err(BackendError::Malformed(_))));

    // Retryable statuses are retried by the controller.
    let lex = sample_lexicon();
    let before = seen.lock().unwrap().len();
    let failing = ChatBackend::new(config(&base));
    let wrapped = FnBackend::new(move |_: &str| failing.complete("status"));
    let opts = SimplifyOptions {
        variant: PromptVariant::NoIntermediate,
        retry: RetryPolicy {
            max_retries: 2,
            initial_backoff_ms: 1,
        },
        ..Default::default()
    };
    let res = simplify(success_example::INITIAL, None, &lex, &wrapped, &opts).unwrap();
    assert_eq!(res.stop_reason, StopReason::BackendFailure);
    assert_eq!(seen.lock().unwrap().len() - before, 3);
}

#[test]
fn unreachable_server_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let backend = ChatBackend::new(config(&format!("http://{addr}")));
    let err = backend.complete("x").unwrap_err();
    assert!(err.is_retryable(), "{err:?}");
}

#[test]
fn chat_mt_client_prompts_for_a_translation() {
    let handler: Handler = Arc::new(|_| (200, chat_reply("  翻訳です。\n")));
    let (base, seen) = spawn_server(handler);
    let client = ChatMtClient::new(config(&base), "English", "Japanese");
    assert_eq!(client.label(), "English-Japanese");
    assert_eq!(client.translate("Hello.").unwrap(), "翻訳です。");
    let prompt = seen.lock().unwrap()[0]["messages"][0]["content"]
        .as_str()
        .unwrap()
        .to_owned();
    assert!(prompt.contains("English") && prompt.contains("Japanese") && prompt.ends_with("Hello."));
}

#[test]
fn http_translate_client_round_trip() {
    let handler: Handler = Arc::new(|body: Value| {
        let text = body["text"].as_str().unwrap().to_owned();
        if text == "blank" {
            (200, json!({ "translation": "   " }))
        } else {
            (
                200,
                json!({ "translation": format!("{}:{}", body["target"].as_str().unwrap(), text) }),
            )
        }
    });
    let (base, seen) = spawn_server(handler);
    let client = HttpTranslateClient::new(format!("{base}/translate"), "en", "ja", Duration::from_secs(5));
    assert_eq!(client.translate("hi").unwrap(), "ja:hi");
    assert_eq!(client.translate("blank"), Err(BackendError::EmptyCompletion));
    assert_eq!(seen.lock().unwrap()[0]["source"], "en");
}

#[test]
fn http_scorer_scales_to_percent() {
    let handler: Handler = Arc::new(|body: Value| {
        let n = body["data"].as_array().unwrap().len();
        (200, json!({ "system_score": 0.25 * n as f64, "scores": [] }))
    });
    let (base, seen) = spawn_server(handler);
    let scorer = HttpScorer {
        name: "comet".into(),
        url: format!("{base}/score"),
        timeout: Duration::from_secs(5),
    };
    let s = vec!["src".to_owned(), "src2".to_owned()];
    let h = vec!["hyp".to_owned(), "hyp2".to_owned()];
    let r = vec!["ref".to_owned(), "ref2".to_owned()];
    assert_eq!(scorer.score(&s, &h, &r).unwrap(), 50.0);
    let seen = seen.lock().unwrap();
    assert_eq!(
        seen[0]["data"][1],
        json!({ "src": "src2", "mt": "hyp2", "ref": "ref2" })
    );
}
