use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use tpp_core::protocol::ProtocolError;
use tpp_core::storage::StorageError;

/// Non-standard status for a session past its TTL.
pub const SESSION_EXPIRED: u16 = 440;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ApiError {
    /// Unknown user or wrong first password; one body for both.
    Unauthorized,
    UnknownSession,
    Blocked,
    /// Every challenge index is spent; the user must change P2.
    ChangeRequired,
    Duplicate,
    Rejected(String),
    BadKey,
    Complete,
    Expired,
    Forbidden,
    Internal,
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<&'a str>,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::Unauthorized | ApiError::UnknownSession => StatusCode::UNAUTHORIZED,
            ApiError::Blocked => StatusCode::LOCKED,
            ApiError::ChangeRequired | ApiError::Duplicate => StatusCode::CONFLICT,
            ApiError::Rejected(_) | ApiError::BadKey => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Complete => StatusCode::GONE,
            ApiError::Expired => StatusCode::from_u16(SESSION_EXPIRED).expect("valid code"),
            ApiError::Forbidden => StatusCode::FORBIDDEN,
            ApiError::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ApiError::Unauthorized => "unauthorized",
            ApiError::UnknownSession => "unknown_session",
            ApiError::Blocked => "blocked",
            ApiError::ChangeRequired => "change_password",
            ApiError::Duplicate => "duplicate_user",
            ApiError::Rejected(_) => "rejected",
            ApiError::BadKey => "bad_key",
            ApiError::Complete => "session_complete",
            ApiError::Expired => "session_expired",
            ApiError::Forbidden => "forbidden",
            ApiError::Internal => "internal",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let detail = match &self {
            ApiError::Rejected(d) => Some(d.as_str()),
            _ => None,
        };
        let body = Json(Body { error: self.code(), detail });
        (self.status(), body).into_response()
    }
}

pub(crate) fn from_protocol(e: ProtocolError) -> ApiError {
    match e {
        ProtocolError::UnknownUser | ProtocolError::BadFirstPassword => ApiError::Unauthorized,
        ProtocolError::AccountBlocked => ApiError::Blocked,
        ProtocolError::AllIndicesExhausted => ApiError::ChangeRequired,
        ProtocolError::SessionFinished => ApiError::Complete,
        ProtocolError::Storage(s) => match s {
            StorageError::UnknownUser | StorageError::WrongPassword => ApiError::Unauthorized,
            StorageError::DuplicateUser => ApiError::Duplicate,
            StorageError::WeakPassword(why) => ApiError::Rejected(why),
            StorageError::RetiredPassword => ApiError::Rejected("password was used before".into()),
            _ => ApiError::Internal,
        },
        ProtocolError::Grid(g) => ApiError::Rejected(g.to_string()),
        _ => ApiError::Internal,
    }
}
