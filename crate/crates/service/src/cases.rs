use std::collections::{BTreeMap, HashMap};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value};

use lexverify_core::constraint::ConstraintBundle;
use lexverify_core::engine::{CheckKind, Verdict};
use lexverify_core::maxsmt::{CorrectionResult, Strategy};
use lexverify_core::trace::render_trace;
use lexverify_store::{CaseFilter, Operation, StoredResult};

use crate::{blocking, versioned, ApiError, Body, Shared};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateCase {
    bundle: ConstraintBundle,
    #[serde(default)]
    expected_version: u64,
    #[serde(default)]
    actor: Option<String>,
}

/// Body is either a bare bundle (create) or
/// `{"bundle": ..., "expected_version": N, "actor": ...}` (create or update).
pub async fn create(State(app): State<Shared>, Body(body): Body<Value>) -> Result<(StatusCode, Json<Value>), ApiError> {
    let schema_err = |e: serde_json::Error| ApiError::new(StatusCode::BAD_REQUEST, "schema_violation", format!("request body: {e}"));
    let req = if body.get("bundle").is_some() {
        serde_json::from_value::<CreateCase>(body).map_err(schema_err)?
    } else {
        CreateCase { bundle: serde_json::from_value(body).map_err(schema_err)?, expected_version: 0, actor: None }
    };
    let op = if req.expected_version == 0 { Operation::Create } else { Operation::Update };
    let actor = req.actor.unwrap_or_else(|| app.actor.clone());
    let version = app.store.put_case(&req.bundle, req.expected_version, &actor, op)?;
    let status = if version == 1 { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(json!({ "case_id": req.bundle.case_id, "version": version }))))
}

/// Query: `id_prefix=...` and any number of `meta.<key>=<value>`.
pub async fn list(State(app): State<Shared>, Query(q): Query<HashMap<String, String>>) -> Result<Json<Value>, ApiError> {
    let filter = CaseFilter {
        id_prefix: q.get("id_prefix").cloned(),
        meta: q.iter().filter_map(|(k, v)| Some((k.strip_prefix("meta.")?.to_string(), v.clone()))).collect(),
    };
    Ok(Json(json!({ "cases": app.store.list_cases(&filter)? })))
}

pub async fn get(State(app): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    Ok(Json(serde_json::to_value(app.store.get_case(&id)?).expect("record serializes")))
}

pub async fn get_version(State(app): State<Shared>, Path((id, version)): Path<(String, u64)>) -> Result<Json<Value>, ApiError> {
    let bundle = app.store.bundle_at(&id, version)?;
    Ok(Json(json!({ "case_id": id, "version": version, "bundle": bundle })))
}

async fn check(app: Shared, id: String, kind: CheckKind) -> Result<Json<Value>, ApiError> {
    let bundle = app.store.get_case(&id)?.bundle;
    let engine = app.engine.clone();
    let verdict: Verdict = blocking(move || match kind {
        CheckKind::Consistency => engine.check_law_consistency(&bundle),
        CheckKind::Illegality => engine.check_case_illegality(&bundle),
    })
    .await??;
    let version = app.store.record_result(&id, StoredResult::Verdict(verdict.clone()), &app.actor)?;
    Ok(Json(versioned(&verdict, version)))
}

pub async fn check_consistency(State(app): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    check(app, id, CheckKind::Consistency).await
}

pub async fn check_illegality(State(app): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    check(app, id, CheckKind::Illegality).await
}

pub async fn illegal_terms(State(app): State<Shared>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let bundle = app.store.get_case(&id)?.bundle;
    let engine = app.engine.clone();
    let report = blocking(move || engine.enumerate_illegal_terms(&bundle)).await??;
    let version = app.store.record_result(&id, StoredResult::IllegalTerms(report.clone()), &app.actor)?;
    Ok(Json(versioned(&report, version)))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeRequest {
    /// `linear` (default) or `core`.
    #[serde(default)]
    pub strategy: Option<String>,
    /// Weight multipliers keyed by constraint id or group.
    #[serde(default)]
    pub weight_override: BTreeMap<String, u64>,
}

impl OptimizeRequest {
    pub fn strategy(&self) -> Result<Strategy, ApiError> {
        self.strategy.as_deref().map_or(Ok(Strategy::default()), |s| s.parse().map_err(ApiError::bad_request))
    }
}

/// Runs the correction and pairs it with its rendered trace.
pub(crate) async fn correct(
    app: &Shared,
    bundle: ConstraintBundle,
    req: &OptimizeRequest,
) -> Result<(CorrectionResult, Vec<String>), ApiError> {
    let strategy = req.strategy()?;
    let overrides = req.weight_override.clone();
    let engine = app.engine.clone();
    blocking(move || {
        let result = engine.minimize_violation(&bundle, strategy, &overrides)?;
        let trace = render_trace(&result, &bundle);
        Ok::<_, ApiError>((result, trace))
    })
    .await?
}

pub async fn optimize(
    State(app): State<Shared>,
    Path(id): Path<String>,
    Body(req): Body<OptimizeRequest>,
) -> Result<Json<Value>, ApiError> {
    let bundle = app.store.get_case(&id)?.bundle;
    let (result, trace) = correct(&app, bundle, &req).await?;
    let version = app.store.record_result(&id, StoredResult::Correction(result.clone()), &app.actor)?;
    let mut body = versioned(&result, version);
    body["trace"] = json!(trace);
    Ok(Json(body))
}
