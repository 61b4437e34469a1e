//! Serves the HTTP API with a mock backend.
//!
//! cargo run --example http_service
//! curl -s localhost:8080/analyze -H 'content-type: application/json' -d '{"text":"They denote songs."}'

use std::sync::Arc;

use aoa_simplify::lexicon::{load_lexicon, LexiconFormat};
use aoa_simplify::rewriter::MockBackend;
use aoa_simplify::service::{serve, AppState, ServiceConfig};

#[tokio::main]
async fn main() -> std::io::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let lex = load_lexicon(
        concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/aoa_sample.csv"),
        LexiconFormat::Csv,
    )
    .unwrap();
    let backend = MockBackend::new([("denote".to_owned(), "describe".to_owned())].into());
    let cfg = ServiceConfig {
        bind: "127.0.0.1:8080".into(),
        cors_origins: vec!["*".into()],
        ..Default::default()
    };
    let state = Arc::new(AppState::new(Arc::new(lex), Arc::new(backend), &cfg));
    serve(state, &cfg).await
}
