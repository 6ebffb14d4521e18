use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use lexverify_core::engine::Engine;
use lexverify_core::fixtures::{fsc_case, FSC_CASE};
use lexverify_core::smtlib::{SmtScript, SolverReply};
use lexverify_core::solver::{SmtBackend, SolverConfig, SolverError};
use lexverify_gateway::{CompletionPort, MockPort, ScriptedPort};
use lexverify_service::{load_corpus, router, AppState, ServiceConfig};
use lexverify_store::Store;

const WORKED_CASE_GROUPS: [&str; 3] = ["insurance:capital_level", "meta:penalty_conditions", "insurance:level_3_measures_executed"];

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

struct Harness {
    app: Router,
    _dir: tempfile::TempDir,
}

fn harness_with(engine: Engine, llm: Arc<dyn CompletionPort>, corpus: bool) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open(dir.path().join("store")).unwrap();
    let index = corpus.then(|| load_corpus(&fixtures().join("retrieval/corpus.jsonl")).unwrap());
    let state = AppState::new(store, engine, index, llm);
    Harness { app: router(Arc::new(state)), _dir: dir }
}

fn z3() -> Engine {
    Engine::connect(SolverConfig::locate(None).expect("z3 on PATH or LEXV_SOLVER").with_timeout(60_000)).unwrap()
}

fn harness() -> Harness {
    harness_with(z3(), Arc::new(MockPort), true)
}

impl Harness {
    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let body = body.map_or_else(Body::empty, |b| Body::from(b.to_string()));
        self.raw(Request::builder().method(method).uri(uri).header("content-type", "application/json").body(body).unwrap())
            .await
    }

    async fn raw(&self, req: Request<Body>) -> (StatusCode, Value) {
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, value)
    }

    async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body)).await
    }

    async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, None).await
    }

    async fn create_fsc(&self) -> String {
        let (status, body) = self.post("/cases", serde_json::from_str(FSC_CASE).unwrap()).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        assert_eq!(body["version"], 1);
        body["case_id"].as_str().unwrap().to_string()
    }

    async fn session(&self, case_id: &str) -> String {
        let (status, body) = self.post("/sessions", json!({ "case_id": case_id })).await;
        assert_eq!(status, StatusCode::CREATED, "{body}");
        body["session_id"].as_str().unwrap().to_string()
    }
}

fn groups(v: &Value) -> Vec<String> {
    v["core_groups"].as_array().unwrap().iter().map(|g| g.as_str().unwrap().to_string()).collect()
}

#[tokio::test]
async fn fsc_illegality_over_http() {
    let h = harness();
    let id = h.create_fsc().await;
    let (status, verdict) = h.post(&format!("/cases/{id}/check/illegality"), json!({})).await;
    assert_eq!(status, StatusCode::OK, "{verdict}");
    assert_eq!(verdict["status"], "unsat");
    let g = groups(&verdict);
    for p in WORKED_CASE_GROUPS {
        assert!(g.iter().any(|x| x == p), "missing {p} in {g:?}");
    }
    // The run was persisted as a new version.
    assert_eq!(verdict["case_version"], 2);
    let (_, record) = h.get(&format!("/cases/{id}")).await;
    assert_eq!(record["version"], 2);
    assert_eq!(record["latest"]["illegality"]["status"], "unsat");
    assert_eq!(record["history"][1]["operation"], "record_result");
}

#[tokio::test]
async fn optimize_returns_single_flip_and_trace() {
    let h = harness();
    let id = h.create_fsc().await;
    for strategy in ["linear", "core"] {
        let (status, body) = h.post(&format!("/cases/{id}/optimize"), json!({ "strategy": strategy })).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        assert_eq!(body["cost"], 1);
        assert_eq!(body["delta"].as_array().unwrap().len(), 1);
        assert_eq!(body["delta"][0]["constraint_id"], "improvement_plan_executed");
        assert_eq!(body["trace"].as_array().unwrap().len(), 1);
    }
    let (status, body) = h.post(&format!("/cases/{id}/optimize"), json!({ "strategy": "annealing" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
}

#[tokio::test]
async fn illegal_terms_endpoint() {
    let h = harness();
    let id = h.create_fsc().await;
    let (status, body) = h.post(&format!("/cases/{id}/illegal-terms"), json!({})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(body["terms"].as_array().is_some_and(|t| !t.is_empty()));
    assert_eq!(body["case_version"], 2);
}

#[tokio::test]
async fn session_toggle_makes_case_legal_without_touching_it() {
    let h = harness();
    let id = h.create_fsc().await;
    let sid = h.session(&id).await;
    let (status, s) = h
        .post(&format!("/sessions/{sid}/modify"), json!({ "target": "plan_executed", "action": "TOGGLE", "expected_version": 0 }))
        .await;
    assert_eq!(status, StatusCode::OK, "{s}");
    assert_eq!(s["version"], 1);
    assert_eq!(s["bundle"]["facts"]["plan_executed"], true);

    let (status, v) = h.post(&format!("/sessions/{sid}/run/check/illegality"), json!({})).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["status"], "sat");
    assert_eq!(v["session_version"], 1);

    let (status, o) = h.post(&format!("/sessions/{sid}/run/optimize"), json!({})).await;
    assert_eq!(status, StatusCode::OK, "{o}");
    assert_eq!(o["cost"], 0);
    assert!(o["delta"].as_array().unwrap().is_empty());

    // Nothing reached the case yet.
    let (_, record) = h.get(&format!("/cases/{id}")).await;
    assert_eq!(record["version"], 1);
    assert_eq!(record["bundle"]["facts"]["plan_executed"], false);

    let (status, c) = h.post(&format!("/sessions/{sid}/commit"), json!({ "actor": "analyst" })).await;
    assert_eq!(status, StatusCode::OK, "{c}");
    assert_eq!(c["bundle_version"], 2);
    assert_eq!(c["results_recorded"], 2);
    assert_eq!(c["version"], 4);
    let (_, record) = h.get(&format!("/cases/{id}")).await;
    assert_eq!(record["bundle"]["facts"]["plan_executed"], true);
    let ops: Vec<&str> = record["history"].as_array().unwrap().iter().map(|e| e["operation"].as_str().unwrap()).collect();
    assert_eq!(ops, ["create", "commit", "record_result", "record_result"]);
    assert_eq!(record["history"][1]["actor"], "analyst");

    // A second commit with nothing new writes nothing.
    let (status, c) = h.post(&format!("/sessions/{sid}/commit"), json!({})).await;
    assert_eq!(status, StatusCode::OK, "{c}");
    assert_eq!(c["version"], 4);
    assert_eq!(c["results_recorded"], 0);
}

#[tokio::test]
async fn fix_value_sort_mismatch_is_400() {
    let h = harness();
    let id = h.create_fsc().await;
    let sid = h.session(&id).await;
    let (status, body) = h
        .post(
            &format!("/sessions/{sid}/modify"),
            json!({ "target": "own_capital", "action": "FIX_VALUE", "value": true, "expected_version": 0 }),
        )
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
    // The session did not move.
    let (_, s) = h.get(&format!("/sessions/{sid}")).await;
    assert_eq!(s["version"], 0);
    // A decimal string is the right sort.
    let (status, body) = h
        .post(
            &format!("/sessions/{sid}/modify"),
            json!({ "target": "own_capital", "action": "FIX_VALUE", "value": "250", "expected_version": 0 }),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
}

#[tokio::test]
async fn sessions_are_isolated() {
    let h = harness();
    let id = h.create_fsc().await;
    let a = h.session(&id).await;
    let b = h.session(&id).await;
    assert_ne!(a, b);
    let (status, _) = h
        .post(&format!("/sessions/{a}/modify"), json!({ "target": "plan_executed", "action": "TOGGLE", "expected_version": 0 }))
        .await;
    assert_eq!(status, StatusCode::OK);
    let (_, sb) = h.get(&format!("/sessions/{b}")).await;
    assert_eq!(sb["version"], 0);
    assert_eq!(sb["bundle"]["facts"]["plan_executed"], false);
    let (_, v) = h.post(&format!("/sessions/{b}/run/check/illegality"), json!({})).await;
    assert_eq!(v["status"], "unsat");
}

#[tokio::test]
async fn conflicts_are_409() {
    let h = harness();
    let id = h.create_fsc().await;
    let sid = h.session(&id).await;
    let stale = json!({ "target": "plan_executed", "action": "TOGGLE", "expected_version": 3 });
    let (status, body) = h.post(&format!("/sessions/{sid}/modify"), stale).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");
    assert_eq!(body["current_version"], 0);

    // The case moves on underneath the session; committing is refused.
    h.post(&format!("/sessions/{sid}/modify"), json!({ "target": "plan_executed", "action": "TOGGLE", "expected_version": 0 }))
        .await;
    let (status, _) = h.post(&format!("/cases/{id}/check/consistency"), json!({})).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = h.post(&format!("/sessions/{sid}/commit"), json!({})).await;
    assert_eq!(status, StatusCode::CONFLICT, "{body}");

    // Stale case update.
    let (status, _) = h.post("/cases", json!({ "bundle": fsc_case(), "expected_version": 1 })).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, body) = h.post("/cases", json!({ "bundle": fsc_case(), "expected_version": 2 })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["version"], 3);
}

#[tokio::test]
async fn unknown_ids_are_404() {
    let h = harness();
    for uri in ["/cases/nope", "/sessions/nope"] {
        assert_eq!(h.get(uri).await.0, StatusCode::NOT_FOUND, "{uri}");
    }
    assert_eq!(h.post("/cases/nope/check/illegality", json!({})).await.0, StatusCode::NOT_FOUND);
    assert_eq!(h.post("/sessions", json!({ "case_id": "nope" })).await.0, StatusCode::NOT_FOUND);
    assert_eq!(h.call(Method::DELETE, "/sessions/nope", None).await.0, StatusCode::NOT_FOUND);
    let id = h.create_fsc().await;
    assert_eq!(h.get(&format!("/cases/{id}/versions/9")).await.0, StatusCode::NOT_FOUND);
    let sid = h.session(&id).await;
    assert_eq!(h.call(Method::DELETE, &format!("/sessions/{sid}"), None).await.0, StatusCode::NO_CONTENT);
    assert_eq!(h.get(&format!("/sessions/{sid}")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_are_400_and_invalid_bundles_422() {
    let h = harness();
    let (status, _) = h
        .raw(Request::post("/cases").header("content-type", "application/json").body(Body::from("{not json")).unwrap())
        .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = h.post("/cases", json!({ "case_id": "x" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let id = h.create_fsc().await;
    let sid = h.session(&id).await;
    // expected_version is required.
    let (status, _) = h.post(&format!("/sessions/{sid}/modify"), json!({ "target": "plan_executed", "action": "TOGGLE" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let mut bad = fsc_case();
    bad.case_id = "bad-case".into();
    bad.penalty_var = "undeclared".into();
    let (status, body) = h.post("/cases", serde_json::to_value(&bad).unwrap()).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert!(body["errors"].as_array().is_some_and(|e| !e.is_empty()));
}

#[tokio::test]
async fn reads_are_idempotent() {
    let h = harness();
    let id = h.create_fsc().await;
    let (_, first) = h.get(&format!("/cases/{id}")).await;
    for uri in [format!("/cases/{id}"), "/cases".to_string(), format!("/cases/{id}/versions/1"), "/schema".to_string()] {
        assert_eq!(h.get(&uri).await.0, StatusCode::OK, "{uri}");
    }
    let (_, again) = h.get(&format!("/cases/{id}")).await;
    assert_eq!(first, again);
    let (_, list) = h.get("/cases?id_prefix=fsc").await;
    assert_eq!(list["cases"].as_array().unwrap().len(), 1);
    let (_, list) = h.get("/cases?id_prefix=zzz").await;
    assert!(list["cases"].as_array().unwrap().is_empty());
}

struct AlwaysTimeout;

impl SmtBackend for AlwaysTimeout {
    fn check(&self, _script: &SmtScript) -> Result<SolverReply, SolverError> {
        Err(SolverError::Timeout { timeout_ms: 7 })
    }

    fn timeout_ms(&self) -> u64 {
        7
    }
}

#[tokio::test]
async fn solver_timeout_is_504_with_bounds() {
    let h = harness_with(Engine::new(AlwaysTimeout), Arc::new(MockPort), false);
    let id = h.create_fsc().await;
    let (status, body) = h.post(&format!("/cases/{id}/optimize"), json!({})).await;
    assert_eq!(status, StatusCode::GATEWAY_TIMEOUT, "{body}");
    assert_eq!(body["error"], "solver_timeout");
    assert!(body.get("lower_bound").is_some());
    let (status, _) = h.post(&format!("/cases/{id}/check/illegality"), json!({})).await;
    assert_eq!(status, StatusCode::GATEWAY_TIMEOUT);
    // Failed runs are not recorded.
    assert_eq!(h.get(&format!("/cases/{id}")).await.1["version"], 1);
}

#[tokio::test]
async fn retrieval_search_and_alpha_extremes() {
    let h = harness();
    let (status, body) = h.post("/retrieval/search", json!({ "query": "capital adequacy ratio", "k": 5 })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let hits = body["hits"].as_array().unwrap();
    assert!(!hits.is_empty() && hits.len() <= 5);
    for hit in hits {
        for field in ["bm25", "sim_vec", "hybrid", "text", "law"] {
            assert!(hit.get(field).is_some(), "{field} missing in {hit}");
        }
    }
    // α = 0 orders by BM25.
    let (_, lexical) = h.post("/retrieval/search", json!({ "query": "capital adequacy ratio", "alpha": 0.0, "k": 12 })).await;
    let scores: Vec<f64> = lexical["hits"].as_array().unwrap().iter().map(|h| h["bm25"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]), "{scores:?}");

    let (status, _) = h.post("/retrieval/search", json!({ "query": "x", "alpha": 1.5 })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let bare = harness_with(z3(), Arc::new(MockPort), false);
    assert_eq!(bare.post("/retrieval/search", json!({ "query": "x" })).await.0, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn retrieval_expand_with_mock_port() {
    let h = harness();
    let (status, body) = h.post("/retrieval/expand", json!({ "doc_id": "ins-143-6", "k": 5 })).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert!(!body["queries"].as_array().unwrap().is_empty());
    let (status, _) = h.post("/retrieval/expand", json!({ "doc_id": "missing" })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn synthesize_with_replay_and_store() {
    let script = std::fs::read_to_string(fixtures().join("replay/synthesis_success.json")).unwrap();
    let h = harness_with(z3(), Arc::new(ScriptedPort::from_json(&script).unwrap()), true);
    let case_text = std::fs::read_to_string(fixtures().join("gateway/fsc_case.txt")).unwrap();
    let (status, body) = h
        .post("/synthesize", json!({ "case_text": case_text, "article_ids": ["ins-143-4", "ins-143-6"], "store": true }))
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["attempts"].as_array().unwrap().len(), 1);
    assert_eq!(body["case_version"], 1);
    let id = body["bundle"]["case_id"].as_str().unwrap();
    assert_eq!(h.get(&format!("/cases/{id}")).await.0, StatusCode::OK);

    // The mock never writes bundles, so synthesis exhausts its rounds.
    let h = harness();
    let (status, body) = h.post("/synthesize", json!({ "case_text": case_text, "article_ids": ["ins-143-4"] })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    assert_eq!(body["attempts"].as_array().unwrap().len(), 3);
    let (status, _) = h.post("/synthesize", json!({ "case_text": "x" })).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn schema_and_cors() {
    let dir = tempfile::tempdir().unwrap();
    let config = ServiceConfig {
        bind: "127.0.0.1:0".parse().unwrap(),
        store_dir: dir.path().join("store"),
        solver: None,
        solver_timeout_ms: None,
        corpus: None,
        cors_origins: vec![],
        ui_dir: None,
    };
    let state = config.build_state(Arc::new(MockPort)).unwrap();
    let h = Harness { app: lexverify_service::app(Arc::new(state), &config), _dir: dir };
    let (status, schema) = h.get("/schema").await;
    assert_eq!(status, StatusCode::OK);
    assert!(schema["bundle"]["$defs"]["expr"].is_object());
    assert!(schema["requests"]["POST /sessions/{sid}/modify"].is_object());
    let req = Request::get("/health").header("origin", "http://localhost:5173").body(Body::empty()).unwrap();
    let resp = h.app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers().get("access-control-allow-origin").unwrap(), "*");
}
