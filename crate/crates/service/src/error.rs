use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use glioseg_core::SegmentError;

/// Body of every error response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub stage: String,
    pub detail: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, stage: &str, detail: impl ToString) -> Self {
        let error = match status {
            StatusCode::NOT_FOUND => "not_found",
            StatusCode::BAD_REQUEST => "bad_request",
            StatusCode::UNPROCESSABLE_ENTITY => "segmentation_failed",
            _ => "internal",
        };
        Self {
            status,
            body: ErrorBody {
                error: error.into(),
                stage: stage.into(),
                detail: detail.to_string(),
            },
        }
    }

    pub fn bad_request(stage: &str, detail: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, stage, detail)
    }

    pub fn not_found(stage: &str, detail: impl ToString) -> Self {
        Self::new(StatusCode::NOT_FOUND, stage, detail)
    }
}

impl From<SegmentError> for ApiError {
    /// Request problems are 400; a well-formed request the method could not
    /// complete is 422.
    fn from(e: SegmentError) -> Self {
        let status = match &e {
            SegmentError::Init(_) | SegmentError::Params(_) => StatusCode::BAD_REQUEST,
            SegmentError::Balloon(glioseg_core::BalloonError::Outline(_) | glioseg_core::BalloonError::Params(_)) => {
                StatusCode::BAD_REQUEST
            }
            SegmentError::Graph(glioseg_core::GraphError::SeedOutOfBounds(_) | glioseg_core::GraphError::Delta { .. } | glioseg_core::GraphError::Spec(_)) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.stage(), e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
