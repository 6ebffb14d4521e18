use axum::body::Bytes;
use axum::extract::{FromRequest, Request};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use lexverify_core::engine::EngineError;
use lexverify_core::whatif::ModifyError;
use lexverify_gateway::SynthesisError;
use lexverify_store::StoreError;

/// JSON error body: `{"error": <code>, "message": ..., ...details}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), details: Value::Null }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code, "message": self.message });
        if let Value::Object(extra) = self.details {
            body.as_object_mut().expect("object").extend(extra);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::NotFound(_) | StoreError::VersionNotFound { .. } => ApiError::not_found(message),
            StoreError::VersionConflict { expected, current, .. } => {
                ApiError::new(StatusCode::CONFLICT, "version_conflict", message)
                    .with_details(json!({ "expected_version": expected, "current_version": current }))
            }
            StoreError::InvalidCaseId(_) => ApiError::bad_request(message),
            StoreError::Invalid(errors) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_bundle", message)
                .with_details(json!({ "errors": errors.iter().map(ToString::to_string).collect::<Vec<_>>() })),
            StoreError::Corrupt { .. } | StoreError::Io { .. } => ApiError::internal(message),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let message = e.to_string();
        match e {
            EngineError::Invalid(errors) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_bundle", message)
                .with_details(json!({ "errors": errors.iter().map(ToString::to_string).collect::<Vec<_>>() })),
            EngineError::SolverTimeout { timeout_ms, lower_bound, upper_bound } => {
                ApiError::new(StatusCode::GATEWAY_TIMEOUT, "solver_timeout", message).with_details(json!({
                    "timeout_ms": timeout_ms,
                    "lower_bound": lower_bound,
                    "upper_bound": upper_bound,
                }))
            }
            EngineError::NoFeasibleCompliance { core } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "no_feasible_compliance", message)
                    .with_details(json!({ "core": core }))
            }
            EngineError::NotIllegal => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "not_illegal", message),
            EngineError::Emit(_)
            | EngineError::Solver(_)
            | EngineError::Inconclusive { .. }
            | EngineError::CoresUnsupported => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "solver_failure", message),
        }
    }
}

impl From<ModifyError> for ApiError {
    fn from(e: ModifyError) -> Self {
        let message = e.to_string();
        match e {
            ModifyError::Invalid(errors) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_bundle", message)
                .with_details(json!({ "errors": errors.iter().map(ToString::to_string).collect::<Vec<_>>() })),
            _ => ApiError::new(StatusCode::BAD_REQUEST, "bad_modification", message),
        }
    }
}

impl From<SynthesisError> for ApiError {
    fn from(e: SynthesisError) -> Self {
        let message = e.to_string();
        match e {
            SynthesisError::SynthesisExhausted { attempts } => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "synthesis_exhausted", message)
                    .with_details(json!({ "attempts": attempts }))
            }
            SynthesisError::NoRounds => ApiError::bad_request(message),
        }
    }
}

/// Like `Json`, but a body that does not match the request type is a 400,
/// and an empty body reads as `{}`.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        let bytes = Bytes::from_request(req, state).await.map_err(|e| ApiError::bad_request(e.body_text()))?;
        let bytes: &[u8] = if bytes.iter().all(u8::is_ascii_whitespace) { b"{}" } else { &bytes };
        serde_json::from_slice(bytes)
            .map(Body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "schema_violation", format!("request body: {e}")))
    }
}
