//! HTTP API over the engine, the case store, retrieval and synthesis.
//!
//! Endpoints are listed in [`router`]; request and response shapes are
//! published at `GET /schema` and described in `docs/http-api.md`.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::http::{HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use lexverify_core::engine::Engine;
use lexverify_core::solver::SolverConfig;
use lexverify_gateway::{CompletionParams, CompletionPort};
use lexverify_store::{Store, StoreError};
use lexverify_text::{HashEmbedder, Index};

mod cases;
pub mod error;
mod retrieval;
pub mod sessions;

pub use error::{ApiError, Body};
pub use sessions::{Session, SessionView};

/// Request schemas, merged with the bundle schema at `GET /schema`.
pub const API_SCHEMA: &str = include_str!("../schema/api.schema.json");

pub struct AppState {
    pub store: Store,
    pub engine: Engine,
    pub index: Option<Index>,
    pub llm: Arc<dyn CompletionPort>,
    pub llm_params: CompletionParams,
    pub sessions: sessions::Sessions,
    /// Recorded as the history actor for writes that name none.
    pub actor: String,
}

impl AppState {
    pub fn new(store: Store, engine: Engine, index: Option<Index>, llm: Arc<dyn CompletionPort>) -> Self {
        AppState {
            store,
            engine,
            index,
            llm,
            llm_params: CompletionParams::default(),
            sessions: sessions::Sessions::default(),
            actor: "service".into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error("no SMT solver found; pass --solver or set LEXV_SOLVER")]
    NoSolver,
    #[error("solver: {0}")]
    Solver(#[from] lexverify_core::solver::SolverError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("corpus {path}: {message}")]
    Corpus { path: String, message: String },
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server: {0}")]
    Serve(std::io::Error),
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    pub store_dir: PathBuf,
    pub solver: Option<PathBuf>,
    pub solver_timeout_ms: Option<u64>,
    /// JSONL retrieval corpus; the retrieval endpoints answer 503 without one.
    pub corpus: Option<PathBuf>,
    /// Empty: any origin.
    pub cors_origins: Vec<String>,
    /// Static files served at `/` (the built web UI).
    pub ui_dir: Option<PathBuf>,
}

pub fn load_corpus(path: &std::path::Path) -> Result<Index, StartupError> {
    let err = |message: String| StartupError::Corpus { path: path.display().to_string(), message };
    let file = std::fs::File::open(path).map_err(|e| err(e.to_string()))?;
    let docs = lexverify_text::read_corpus_jsonl(std::io::BufReader::new(file)).map_err(|e| err(e.to_string()))?;
    Index::build(docs, Arc::new(HashEmbedder::default())).map_err(|e| err(e.to_string()))
}

impl ServiceConfig {
    pub fn build_state(&self, llm: Arc<dyn CompletionPort>) -> Result<AppState, StartupError> {
        let mut solver = SolverConfig::locate(self.solver.as_deref()).ok_or(StartupError::NoSolver)?;
        if let Some(ms) = self.solver_timeout_ms {
            solver = solver.with_timeout(ms);
        }
        let engine = Engine::connect(solver)?;
        let store = Store::open(&self.store_dir)?;
        let index = self.corpus.as_deref().map(load_corpus).transpose()?;
        Ok(AppState::new(store, engine, index, llm))
    }

    pub fn cors(&self) -> CorsLayer {
        let layer = CorsLayer::new().allow_methods([Method::GET, Method::POST, Method::DELETE]).allow_headers(Any);
        if self.cors_origins.is_empty() {
            layer.allow_origin(Any)
        } else {
            let origins: Vec<HeaderValue> = self.cors_origins.iter().filter_map(|o| o.parse().ok()).collect();
            layer.allow_origin(AllowOrigin::list(origins))
        }
    }
}

pub type Shared = Arc<AppState>;

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/schema", get(schema))
        .route("/cases", post(cases::create).get(cases::list))
        .route("/cases/{id}", get(cases::get))
        .route("/cases/{id}/versions/{version}", get(cases::get_version))
        .route("/cases/{id}/check/consistency", post(cases::check_consistency))
        .route("/cases/{id}/check/illegality", post(cases::check_illegality))
        .route("/cases/{id}/illegal-terms", post(cases::illegal_terms))
        .route("/cases/{id}/optimize", post(cases::optimize))
        .route("/sessions", post(sessions::create))
        .route("/sessions/{sid}", get(sessions::get).delete(sessions::remove))
        .route("/sessions/{sid}/modify", post(sessions::modify))
        .route("/sessions/{sid}/run/check/consistency", post(sessions::run_consistency))
        .route("/sessions/{sid}/run/check/illegality", post(sessions::run_illegality))
        .route("/sessions/{sid}/run/check", post(sessions::run_illegality))
        .route("/sessions/{sid}/run/illegal-terms", post(sessions::run_illegal_terms))
        .route("/sessions/{sid}/run/optimize", post(sessions::run_optimize))
        .route("/sessions/{sid}/commit", post(sessions::commit))
        .route("/retrieval/search", post(retrieval::search))
        .route("/retrieval/expand", post(retrieval::expand))
        .route("/synthesize", post(retrieval::synthesize))
        .with_state(state)
}

/// The router plus CORS and, if configured, the static UI.
pub fn app(state: Shared, config: &ServiceConfig) -> Router {
    let mut app = router(state);
    if let Some(dir) = &config.ui_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    app.layer(config.cors())
}

/// Binds and serves until ctrl-c.
pub async fn serve(config: ServiceConfig, state: AppState) -> Result<(), StartupError> {
    let app = app(Arc::new(state), &config);
    let listener = tokio::net::TcpListener::bind(config.bind)
        .await
        .map_err(|source| StartupError::Bind { addr: config.bind.to_string(), source })?;
    tracing::info!("listening on {}", config.bind);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(StartupError::Serve)
}

async fn health() -> axum::Json<serde_json::Value> {
    axum::Json(serde_json::json!({ "status": "ok" }))
}

async fn schema() -> axum::Json<serde_json::Value> {
    let mut api: serde_json::Value = serde_json::from_str(API_SCHEMA).expect("api schema is valid JSON");
    api["bundle"] = serde_json::from_str(lexverify_core::BUNDLE_SCHEMA).expect("bundle schema is valid JSON");
    axum::Json(api)
}

/// `result` as a JSON object with `case_version` added.
pub(crate) fn versioned<T: Serialize>(result: &T, version: u64) -> serde_json::Value {
    let mut v = serde_json::to_value(result).expect("result serializes");
    v["case_version"] = version.into();
    v
}

pub(crate) async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}
