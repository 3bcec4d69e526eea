use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use crate::store::{FieldError, StoreError};

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status: status.as_u16(), code: code.to_owned(), message: message.into(), fields: Vec::new() }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn invalid_parameter(name: &str, message: impl Into<String>) -> Self {
        let message = message.into();
        Self {
            fields: vec![FieldError { field: name.to_owned(), message: message.clone() }],
            ..Self::bad_request("invalid_parameter", message)
        }
    }

    pub fn sensor_not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "sensor_not_found", format!("no sensor with id {id:?}"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal_error", message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Validation(fields) => {
                Self { fields, ..Self::bad_request("validation_failed", "the report has invalid fields") }
            }
            StoreError::OutOfArea { .. } => {
                let message = e.to_string();
                Self {
                    fields: vec![FieldError { field: "location".into(), message: message.clone() }],
                    ..Self::bad_request("out_of_service_area", message)
                }
            }
            StoreError::UnknownReport(id) => {
                Self::new(StatusCode::NOT_FOUND, "report_not_found", format!("no report with id {id:?}"))
            }
            other => {
                tracing::error!(error = %other, "storage failure");
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_error", "could not store the record")
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}
