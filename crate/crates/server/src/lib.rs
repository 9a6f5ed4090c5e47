//! Session service: live teaching sessions over JSON/HTTP.
//!
//! Routes (payload shapes in `schema/session-api.schema.json`):
//!
//! - `POST /sessions`
//! - `GET /sessions/{id}/view`
//! - `POST /sessions/{id}/actions` with `{"action": "..."}`
//! - `POST /sessions/{id}/advance`
//! - `GET /sessions/{id}/trace` (JSONL)

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use coach_core::session::{BoundaryOutcome, Session, SessionConfig, SessionView, StepOutcome};
use coach_core::Error as CoreError;
use serde::{Deserialize, Serialize};
use tokio::sync::{Mutex, RwLock};
use tokio::time::Instant;
use uuid::Uuid;

pub const SCHEMA: &str = include_str!("../schema/session-api.schema.json");

#[derive(Debug, Clone)]
pub struct ServerOptions {
    /// Idle time after which the player's move defaults to the idle action.
    pub action_timeout: Duration,
    /// How often the sweeper looks for timed-out sessions.
    pub sweep_interval: Duration,
}

impl Default for ServerOptions {
    fn default() -> Self {
        Self {
            action_timeout: Duration::from_secs(30),
            sweep_interval: Duration::from_secs(1),
        }
    }
}

struct Entry {
    session: Session,
    last_activity: Instant,
}

type Shared = Arc<Mutex<Entry>>;

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<Uuid, Shared>>>,
    options: ServerOptions,
}

impl AppState {
    pub fn new(options: ServerOptions) -> Self {
        Self {
            sessions: Arc::default(),
            options,
        }
    }

    async fn get(&self, id: &str) -> Result<Shared, ApiError> {
        let not_found = || ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no session `{id}`"));
        let id = Uuid::parse_str(id).map_err(|_| not_found())?;
        self.sessions.read().await.get(&id).cloned().ok_or_else(not_found)
    }

    pub async fn session_count(&self) -> usize {
        self.sessions.read().await.len()
    }

    /// Plays the idle action for every session whose player has been silent too long.
    pub async fn sweep(&self) -> usize {
        let entries: Vec<Shared> = self.sessions.read().await.values().cloned().collect();
        let mut applied = 0;
        for entry in entries {
            // A busy session is being served right now, so it is not idle.
            let Ok(mut e) = entry.try_lock() else { continue };
            if e.last_activity.elapsed() >= self.options.action_timeout && e.session.expects_action() {
                match e.session.timeout() {
                    Ok(_) => applied += 1,
                    Err(err) => tracing::warn!(%err, "timeout step failed"),
                }
                e.last_activity = Instant::now();
            }
        }
        applied
    }
}

/// Error body: `{code, message, legal_actions?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legal_actions: Option<Vec<String>>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.to_string(),
                message: message.into(),
                legal_actions: None,
            },
        }
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        let message = e.to_string();
        match e {
            CoreError::InvalidAction { legal, .. } => Self {
                status: StatusCode::UNPROCESSABLE_ENTITY,
                body: ErrorBody {
                    code: "invalid_action".into(),
                    message,
                    legal_actions: Some(legal),
                },
            },
            CoreError::Conflict(_) => Self::new(StatusCode::CONFLICT, "conflict", message),
            CoreError::Config(_) | CoreError::Json(_) => Self::new(StatusCode::BAD_REQUEST, "invalid_config", message),
            _ => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: Uuid,
    pub view: SessionView,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViewResponse {
    pub session_id: Uuid,
    #[serde(flatten)]
    pub view: SessionView,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionRequest {
    pub action: String,
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<SessionConfig>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let Json(config) = body?;
    let session = tokio::task::spawn_blocking(move || Session::new(config))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    let view = session.view();
    let id = Uuid::new_v4();
    let entry = Entry {
        session,
        last_activity: Instant::now(),
    };
    state.sessions.write().await.insert(id, Arc::new(Mutex::new(entry)));
    tracing::info!(%id, "session created");
    Ok((StatusCode::CREATED, Json(CreateResponse { session_id: id, view })))
}

async fn get_view(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ViewResponse>, ApiError> {
    let entry = state.get(&id).await?;
    let e = entry.lock().await;
    Ok(Json(ViewResponse {
        session_id: Uuid::parse_str(&id).expect("validated by lookup"),
        view: e.session.view(),
    }))
}

async fn post_action(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ActionRequest>, JsonRejection>,
) -> Result<Json<StepOutcome>, ApiError> {
    let Json(req) = body?;
    let entry = state.get(&id).await?;
    let mut e = entry.lock().await;
    let outcome = e.session.post_action(&req.action)?;
    e.last_activity = Instant::now();
    Ok(Json(outcome))
}

async fn advance(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<BoundaryOutcome>, ApiError> {
    let entry = state.get(&id).await?;
    // The refit runs on the blocking pool while the session lock is held, so
    // no request can observe a half-updated belief set.
    let mut guard = entry.lock_owned().await;
    let outcome = tokio::task::spawn_blocking(move || {
        let out = guard.session.advance();
        guard.last_activity = Instant::now();
        out
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(outcome))
}

async fn get_trace(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let entry = state.get(&id).await?;
    let e = entry.lock().await;
    let mut buf = Vec::new();
    e.session.write_trace_jsonl(&mut buf)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], buf).into_response())
}

async fn get_schema() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/schema+json")], SCHEMA)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/view", get(get_view))
        .route("/sessions/{id}/actions", post(post_action))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/trace", get(get_trace))
        .route("/schema", get(get_schema))
        .with_state(state)
}

/// Serves until the process ends, with the timeout sweeper running alongside.
pub async fn serve(addr: SocketAddr, options: ServerOptions) -> std::io::Result<()> {
    let state = AppState::new(options.clone());
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(options.sweep_interval);
        loop {
            tick.tick().await;
            sweeper.sweep().await;
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
