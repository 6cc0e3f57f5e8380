use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

use agroml::explain::ExplainError;
use agroml::fertilizer::FertilizerError;
use agroml::predictor::PredictorError;

/// Every non-2xx response body is `{"error": {"code", "message", "details"?}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub details: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            details: None,
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = Some(details);
        self
    }

    pub fn missing_field(field: &str) -> Self {
        Self::new(
            StatusCode::BAD_REQUEST,
            "MissingField",
            format!("field `{field}` is required"),
        )
        .with_details(json!({ "field": field }))
    }

    pub fn non_numeric(field: &str) -> Self {
        Self::new(
            StatusCode::BAD_REQUEST,
            "NonNumeric",
            format!("field `{field}` must be a finite number"),
        )
        .with_details(json!({ "field": field }))
    }

    pub fn invalid_field(field: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "InvalidField", message)
            .with_details(json!({ "field": field }))
    }

    pub fn invalid_body(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "InvalidBody", message)
    }

    pub fn invalid_multipart(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "InvalidMultipart", message)
    }

    pub fn missing_image() -> Self {
        Self::new(
            StatusCode::BAD_REQUEST,
            "MissingImage",
            "multipart field `image` is required",
        )
    }

    pub fn undecodable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "UndecodableImage", message)
    }

    pub fn too_large(limit: usize) -> Self {
        Self::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "TooLarge",
            format!("request body exceeds the {limit}-byte limit"),
        )
        .with_details(json!({ "limit_bytes": limit }))
    }

    pub fn not_found(path: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "NotFound",
            format!("no route for {path}"),
        )
    }

    pub fn method_not_allowed() -> Self {
        Self::new(
            StatusCode::METHOD_NOT_ALLOWED,
            "MethodNotAllowed",
            "method not allowed on this route",
        )
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    pub fn model_not_loaded() -> Self {
        Self::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "ModelNotLoaded",
            "no crop model is configured",
        )
    }

    pub fn catalog_not_loaded() -> Self {
        Self::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "CatalogNotLoaded",
            "no disease catalog is loaded",
        )
    }

    pub fn explain_timeout(budget_secs: u64, completed: Option<usize>) -> Self {
        let mut details = json!({ "budget_secs": budget_secs });
        if let Some(c) = completed {
            details["completed_predictions"] = json!(c);
        }
        Self::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "ExplainTimeout",
            format!("explanation exceeded its {budget_secs} s budget"),
        )
        .with_details(details)
    }

    pub fn body(&self) -> Value {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(d) = &self.details {
            error["details"] = d.clone();
        }
        json!({ "error": error })
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {}",
            self.status.as_u16(),
            self.code,
            self.message
        )
    }
}

impl std::error::Error for ApiError {}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::warn!("{self}");
        }
        (self.status, Json(self.body())).into_response()
    }
}

impl From<FertilizerError> for ApiError {
    fn from(e: FertilizerError) -> Self {
        match &e {
            FertilizerError::UnknownCrop { crop, suggestions } => {
                Self::new(StatusCode::BAD_REQUEST, "UnknownCrop", e.to_string())
                    .with_details(json!({ "crop": crop, "suggestions": suggestions }))
            }
            FertilizerError::NegativeInput { nutrient, value } => {
                Self::new(StatusCode::BAD_REQUEST, "NegativeInput", e.to_string()).with_details(
                    json!({ "field": nutrient.to_string().to_lowercase(), "value": value }),
                )
            }
            _ => Self::internal(e.to_string()),
        }
    }
}

impl From<PredictorError> for ApiError {
    fn from(e: PredictorError) -> Self {
        match &e {
            PredictorError::ExternalUnavailable { .. } => Self::new(
                StatusCode::BAD_GATEWAY,
                "ExternalUnavailable",
                e.to_string(),
            ),
            PredictorError::ProtocolViolation(_) => {
                Self::new(StatusCode::BAD_GATEWAY, "ProtocolViolation", e.to_string())
            }
            _ => Self::internal(e.to_string()),
        }
    }
}

impl ApiError {
    /// Maps explanation failures; `budget_secs` is reported on timeouts.
    pub fn from_explain(e: ExplainError, budget_secs: u64) -> Self {
        match e {
            ExplainError::DeadlineExceeded { completed } => {
                Self::explain_timeout(budget_secs, Some(completed))
            }
            ExplainError::Predictor { source, .. } => source.into(),
            ExplainError::Image(e) => Self::undecodable(e.to_string()),
            other => Self::internal(other.to_string()),
        }
    }
}
