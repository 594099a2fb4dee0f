use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use knet_core::{DecisionError, FindingError, InferenceError, SessionError};
use serde_json::json;

/// An error response: `{"error": {"code", "message"}}` plus an optional
/// extra top-level field holding pre-serialized JSON.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub extra: Option<(&'static str, String)>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), extra: None }
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn with(mut self, key: &'static str, value: &impl serde::Serialize) -> Self {
        self.extra = Some((key, serde_json::to_string(value).expect("response serializes")));
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let error = json!({ "code": self.code, "message": self.message });
        let body = match self.extra {
            Some((k, raw)) => format!("{{\"error\":{error},{}:{raw}}}", json!(k)),
            None => format!("{{\"error\":{error}}}"),
        };
        (self.status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

impl From<FindingError> for ApiError {
    fn from(e: FindingError) -> Self {
        let code = match &e {
            FindingError::UnknownNode(_) => return ApiError::not_found("UnknownNode", e.to_string()),
            FindingError::NotInstantiable(_) => "NotInstantiable",
            FindingError::InvalidState { .. } | FindingError::UnknownLabel { .. } => "InvalidState",
        };
        ApiError::unprocessable(code, e.to_string())
    }
}

impl From<InferenceError> for ApiError {
    fn from(e: InferenceError) -> Self {
        SessionError::from(e).into()
    }
}

impl From<DecisionError> for ApiError {
    fn from(e: DecisionError) -> Self {
        SessionError::from(e).into()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::Finding(f) => f.into(),
            SessionError::ImpossibleEvidence => {
                ApiError::new(StatusCode::CONFLICT, "ImpossibleEvidence", message)
            }
            SessionError::NotAsserted(_) => ApiError::not_found("NotAsserted", message),
            SessionError::NotDecisionNetwork => {
                ApiError::new(StatusCode::CONFLICT, "NotDecisionNetwork", message)
            }
            SessionError::Inference(InferenceError::TooLarge { .. })
            | SessionError::Decision(DecisionError::TooManyConfigurations { .. }) => {
                ApiError::unprocessable("TooLarge", message)
            }
            SessionError::WrongKb { .. } | SessionError::ReplayDiverged { .. } => {
                ApiError::unprocessable("InvalidDocument", message)
            }
            SessionError::Inference(_) | SessionError::Decision(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
            }
        }
    }
}
