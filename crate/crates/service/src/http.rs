//! HTTP/JSON surface of the session service.
//!
//! | method | path                          | body / query                         |
//! |--------|-------------------------------|--------------------------------------|
//! | POST   | `/sessions`                   | `CreateSession`                      |
//! | GET    | `/sessions/{id}`              |                                      |
//! | POST   | `/sessions/{id}/actions`      | `PostAction`                         |
//! | POST   | `/sessions/{id}/leaderboard`  | `{"displayName": ...}`               |
//! | GET    | `/leaderboard`                | `orderBy`, `limit`                   |
//! | GET    | `/research/export`            | `from`, `to`, `tokens` + secret hdr  |
//! | GET    | `/health`                     |                                      |
//!
//! Errors are `{"error": {"code", "message", ...}}` with a matching status.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uuid::Uuid;

use crate::service::{ActionResponse, CreateSession, ExportFilter, PostAction, ServiceError, SessionService};
use transition_core::engine::ActionError;

pub const SECRET_HEADER: &str = "x-researcher-secret";
pub const DEFAULT_LEADERBOARD_LIMIT: usize = 20;
pub const MAX_LEADERBOARD_LIMIT: usize = 1000;

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<SessionService>,
    pub researcher_secret: Option<Arc<str>>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/leaderboard", post(submit_score))
        .route("/leaderboard", get(leaderboard))
        .route("/research/export", get(export))
        .with_state(state)
}

pub struct ApiError {
    status: StatusCode,
    body: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError {
            status,
            body: json!({ "error": { "code": code, "message": message.into() } }),
        }
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::UnknownSession(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict { .. } | ServiceError::AlreadyListed(_) | ServiceError::NotCompleted(_) => {
                StatusCode::CONFLICT
            }
            ServiceError::Rejected(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Invalid(_) | ServiceError::NameRejected | ServiceError::Metrics(_) => StatusCode::BAD_REQUEST,
            ServiceError::Storage(_) | ServiceError::Replay { .. } => StatusCode::SERVICE_UNAVAILABLE,
        };
        let mut err = ApiError::new(status, e.code(), e.to_string());
        if let ServiceError::Conflict { expected, .. } = e {
            err.body["error"]["expectedSeq"] = json!(expected);
        }
        err
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn parse_id(raw: &str) -> Result<Uuid, ApiError> {
    Uuid::parse_str(raw).map_err(|_| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("unknown session {raw}")))
}

fn bad_json(e: impl std::fmt::Display) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.to_string())
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("service task panicked")
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "status": "ok", "sessions": state.service.session_count() }))
}

async fn create_session(State(state): State<AppState>, body: Option<Json<Value>>) -> Result<Response, ApiError> {
    let req: CreateSession = match body {
        Some(Json(v)) if !v.is_null() => serde_json::from_value(v).map_err(bad_json)?,
        _ => CreateSession::default(),
    };
    let service = state.service.clone();
    let view = blocking(move || service.create_session(req)).await?;
    Ok((StatusCode::CREATED, Json(view)).into_response())
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let service = state.service.clone();
    let view = blocking(move || service.get_state(id)).await?;
    Ok(Json(view).into_response())
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Rejection {
    error: Value,
    #[serde(flatten)]
    response: ActionResponse,
}

fn rejection_body(err: &ActionError) -> Value {
    let mut body = json!({ "code": err.code(), "message": err.to_string() });
    if let ActionError::InsufficientSupply {
        summer_surplus_tj,
        winter_surplus_tj,
    } = err
    {
        body["summerSurplusTj"] = json!(summer_surplus_tj);
        body["winterSurplusTj"] = json!(winter_surplus_tj);
    }
    body
}

async fn post_action(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<Value>,
) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let req: PostAction = serde_json::from_value(body).map_err(bad_json)?;
    let service = state.service.clone();
    let (response, rejected) = blocking(move || service.post_action(id, req)).await?;
    Ok(match rejected {
        None => Json(response).into_response(),
        Some(err) => (
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(Rejection {
                error: rejection_body(&err),
                response,
            }),
        )
            .into_response(),
    })
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ScoreSubmission {
    display_name: String,
}

async fn submit_score(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<Value>,
) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let req: ScoreSubmission = serde_json::from_value(body).map_err(bad_json)?;
    let service = state.service.clone();
    let entry = blocking(move || service.submit_score(id, &req.display_name)).await?;
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "displayName": entry.display_name,
            "scoreCard": entry.score_card,
            "completedAt": entry.completed_at,
        })),
    )
        .into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct LeaderboardQuery {
    order_by: Option<String>,
    limit: Option<usize>,
}

async fn leaderboard(
    State(state): State<AppState>,
    Query(q): Query<LeaderboardQuery>,
) -> Result<Json<Value>, ApiError> {
    let order_by = q.order_by.unwrap_or_else(|| "emissions".into());
    let limit = q.limit.unwrap_or(DEFAULT_LEADERBOARD_LIMIT).min(MAX_LEADERBOARD_LIMIT);
    let entries = state.service.leaderboard(&order_by, limit)?;
    let entries: Vec<Value> = entries
        .into_iter()
        .map(|e| {
            json!({
                "displayName": e.display_name,
                "scoreCard": e.score_card,
                "completedAt": e.completed_at,
            })
        })
        .collect();
    Ok(Json(json!({ "orderBy": order_by, "entries": entries })))
}

#[derive(Deserialize)]
struct ExportQuery {
    from: Option<DateTime<Utc>>,
    to: Option<DateTime<Utc>>,
    /// Comma-separated survey tokens.
    tokens: Option<String>,
}

/// Constant-time comparison so the secret cannot be probed byte by byte.
fn secret_matches(given: &[u8], expected: &[u8]) -> bool {
    if given.len() != expected.len() {
        return false;
    }
    given.iter().zip(expected).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}

async fn export(
    State(state): State<AppState>,
    headers: HeaderMap,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let Some(given) = headers.get(SECRET_HEADER) else {
        return Err(ApiError::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "missing researcher credential",
        ));
    };
    let authorized = state
        .researcher_secret
        .as_ref()
        .is_some_and(|secret| secret_matches(given.as_bytes(), secret.as_bytes()));
    if !authorized {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "forbidden",
            "researcher credential not accepted",
        ));
    }
    let filter = ExportFilter {
        from: q.from,
        to: q.to,
        tokens: q.tokens.map(|t| {
            t.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect::<BTreeSet<_>>()
        }),
    };
    let service = state.service.clone();
    let records = blocking(move || service.export(&filter)).await;
    let mut body = String::new();
    for r in &records {
        body.push_str(&serde_json::to_string(r).expect("export serializes"));
        body.push('\n');
    }
    Ok(Response::builder()
        .header(header::CONTENT_TYPE, "application/x-ndjson")
        .body(Body::from(body))
        .expect("valid response"))
}
