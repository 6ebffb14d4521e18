//! What-if sessions: a working copy of a case that accepts modifications and
//! runs checks without touching the stored case until commit.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::Json;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use lexverify_core::constraint::ConstraintBundle;
use lexverify_core::engine::CheckKind;
use lexverify_core::whatif::{apply_modification, ModifyRequest};
use lexverify_store::{Operation, StoredResult};

use crate::cases::{correct, OptimizeRequest};
use crate::{blocking, ApiError, Body, Shared};

#[derive(Clone, Debug, Serialize)]
pub struct AppliedModification {
    /// Session version this modification produced.
    pub version: u64,
    pub request: ModifyRequest,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepResult {
    /// Session version the result was computed on.
    pub session_version: u64,
    #[serde(flatten)]
    pub result: StoredResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<String>>,
    /// Written to the case by a commit.
    pub persisted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Session {
    pub session_id: String,
    pub case_id: String,
    /// Case version the working bundle started from (or was last committed as).
    pub base_version: u64,
    /// Number of modifications applied; a modify request must name it.
    pub version: u64,
    pub bundle: ConstraintBundle,
    pub applied: Vec<AppliedModification>,
    pub results: Vec<StepResult>,
    /// Whether the working bundle differs from the case at `base_version`.
    pub dirty: bool,
}

pub type SessionView = Session;

#[derive(Default)]
pub struct Sessions {
    next: AtomicU64,
    live: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl Sessions {
    fn insert(&self, mut session: Session) -> Session {
        let n = self.next.fetch_add(1, Ordering::Relaxed);
        let nanos = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.subsec_nanos());
        session.session_id = format!("s{n}-{nanos:08x}");
        self.live.lock().expect("sessions poisoned").insert(session.session_id.clone(), Arc::new(Mutex::new(session.clone())));
        session
    }

    pub fn get(&self, sid: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.live
            .lock()
            .expect("sessions poisoned")
            .get(sid)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("session `{sid}` not found")))
    }

    fn remove(&self, sid: &str) -> bool {
        self.live.lock().expect("sessions poisoned").remove(sid).is_some()
    }

    pub fn len(&self) -> usize {
        self.live.lock().expect("sessions poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn lock(s: &Mutex<Session>) -> std::sync::MutexGuard<'_, Session> {
    s.lock().unwrap_or_else(|e| e.into_inner())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    case_id: String,
    /// Defaults to the current version.
    #[serde(default)]
    version: Option<u64>,
}

pub async fn create(State(app): State<Shared>, Body(req): Body<CreateSession>) -> Result<(StatusCode, Json<Session>), ApiError> {
    let version = match req.version {
        Some(v) => v,
        None => app.store.get_case(&req.case_id)?.version,
    };
    let bundle = app.store.bundle_at(&req.case_id, version)?;
    let session = app.sessions.insert(Session {
        session_id: String::new(),
        case_id: req.case_id,
        base_version: version,
        version: 0,
        bundle,
        applied: vec![],
        results: vec![],
        dirty: false,
    });
    Ok((StatusCode::CREATED, Json(session)))
}

pub async fn get(State(app): State<Shared>, Path(sid): Path<String>) -> Result<Json<Session>, ApiError> {
    let s = app.sessions.get(&sid)?;
    let view = lock(&s).clone();
    Ok(Json(view))
}

pub async fn remove(State(app): State<Shared>, Path(sid): Path<String>) -> Result<StatusCode, ApiError> {
    if app.sessions.remove(&sid) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(format!("session `{sid}` not found")))
    }
}

fn conflict(expected: u64, current: u64) -> ApiError {
    ApiError::new(StatusCode::CONFLICT, "version_conflict", format!("session is at version {current}, request expected {expected}"))
        .with_details(json!({ "expected_version": expected, "current_version": current }))
}

/// Applies one modification; the result is re-validated before it replaces
/// the working bundle.
pub async fn modify(
    State(app): State<Shared>,
    Path(sid): Path<String>,
    Body(req): Body<ModifyRequest>,
) -> Result<Json<Session>, ApiError> {
    let s = app.sessions.get(&sid)?;
    let mut session = lock(&s);
    if req.expected_version != session.version {
        return Err(conflict(req.expected_version, session.version));
    }
    let bundle = apply_modification(&session.bundle, &req.target, &req.action)?;
    session.bundle = bundle;
    session.version += 1;
    session.dirty = true;
    let version = session.version;
    session.applied.push(AppliedModification { version, request: req });
    Ok(Json(session.clone()))
}

/// Runs `job` on a snapshot of the working bundle and files the result under
/// the snapshot's version.
async fn run<F>(app: Shared, sid: String, job: F) -> Result<Json<Value>, ApiError>
where
    F: FnOnce(ConstraintBundle) -> Result<(StoredResult, Option<Vec<String>>), ApiError> + Send + 'static,
{
    let s = app.sessions.get(&sid)?;
    let (bundle, version) = {
        let session = lock(&s);
        (session.bundle.clone(), session.version)
    };
    let (result, trace) = blocking(move || job(bundle)).await??;
    let step = StepResult { session_version: version, result, trace, persisted: false };
    lock(&s).results.push(step.clone());
    let mut body = match &step.result {
        StoredResult::Verdict(v) => serde_json::to_value(v),
        StoredResult::Correction(c) => serde_json::to_value(c),
        StoredResult::IllegalTerms(r) => serde_json::to_value(r),
    }
    .expect("result serializes");
    body["session_version"] = version.into();
    if let Some(trace) = step.trace {
        body["trace"] = json!(trace);
    }
    Ok(Json(body))
}

async fn run_check(app: Shared, sid: String, kind: CheckKind) -> Result<Json<Value>, ApiError> {
    let engine = app.engine.clone();
    run(app, sid, move |b| {
        let verdict = match kind {
            CheckKind::Consistency => engine.check_law_consistency(&b)?,
            CheckKind::Illegality => engine.check_case_illegality(&b)?,
        };
        Ok((StoredResult::Verdict(verdict), None))
    })
    .await
}

pub async fn run_consistency(State(app): State<Shared>, Path(sid): Path<String>) -> Result<Json<Value>, ApiError> {
    run_check(app, sid, CheckKind::Consistency).await
}

pub async fn run_illegality(State(app): State<Shared>, Path(sid): Path<String>) -> Result<Json<Value>, ApiError> {
    run_check(app, sid, CheckKind::Illegality).await
}

pub async fn run_illegal_terms(State(app): State<Shared>, Path(sid): Path<String>) -> Result<Json<Value>, ApiError> {
    let engine = app.engine.clone();
    run(app, sid, move |b| Ok((StoredResult::IllegalTerms(engine.enumerate_illegal_terms(&b)?), None))).await
}

pub async fn run_optimize(
    State(app): State<Shared>,
    Path(sid): Path<String>,
    Body(req): Body<OptimizeRequest>,
) -> Result<Json<Value>, ApiError> {
    let s = app.sessions.get(&sid)?;
    let (bundle, version) = {
        let session = lock(&s);
        (session.bundle.clone(), session.version)
    };
    let (result, trace) = correct(&app, bundle, &req).await?;
    let mut body = serde_json::to_value(&result).expect("result serializes");
    body["session_version"] = version.into();
    body["trace"] = json!(trace);
    lock(&s).results.push(StepResult { session_version: version, result: StoredResult::Correction(result), trace: Some(trace), persisted: false });
    Ok(Json(body))
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitRequest {
    #[serde(default)]
    actor: Option<String>,
}

/// Writes the working bundle to the case (only if it changed) and then the
/// results computed on the final working version. Fails with 409 when the
/// case moved on since the session's base version.
pub async fn commit(
    State(app): State<Shared>,
    Path(sid): Path<String>,
    Body(req): Body<CommitRequest>,
) -> Result<Json<Value>, ApiError> {
    let s = app.sessions.get(&sid)?;
    let mut session = lock(&s);
    let actor = req.actor.unwrap_or_else(|| app.actor.clone());
    let mut version = session.base_version;
    let mut bundle_version = None;
    if session.dirty {
        version = app.store.put_case(&session.bundle, session.base_version, &actor, Operation::Commit)?;
        bundle_version = Some(version);
    } else {
        let current = app.store.current_version(&session.case_id)?;
        if current != session.base_version {
            return Err(ApiError::from(lexverify_store::StoreError::VersionConflict {
                case_id: session.case_id.clone(),
                expected: session.base_version,
                current,
            }));
        }
    }
    let head = session.version;
    let case_id = session.case_id.clone();
    let mut recorded = 0;
    for r in session.results.iter_mut().filter(|r| r.session_version == head && !r.persisted) {
        version = app.store.record_result(&case_id, r.result.clone(), &actor)?;
        r.persisted = true;
        recorded += 1;
    }
    session.base_version = version;
    session.dirty = false;
    Ok(Json(json!({
        "case_id": session.case_id,
        "version": version,
        "bundle_version": bundle_version,
        "results_recorded": recorded,
    })))
}
