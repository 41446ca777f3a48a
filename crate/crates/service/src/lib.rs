//! HTTP session API over the clearance simulator.
//!
//! | method | path | |
//! |---|---|---|
//! | `POST` | `/sessions` | create a session, 201 |
//! | `GET` | `/sessions/{id}` | state snapshot |
//! | `POST` | `/sessions/{id}/clear` | clear one tile |
//! | `GET` | `/sessions/{id}/risk` | risk map and pattern overlays |
//! | `GET` | `/sessions/{id}/suggestion` | next tile |
//! | `GET` | `/health` | liveness and loaded models |
//!
//! Errors are `{code, message}` bodies. Mutations on one session are
//! serialized; a clear carrying an outdated `revision` gets 410.

mod error;
mod session;
mod store;

pub use error::ApiError;
pub use session::{
    ClearOutcome, ClearRequest, GridView, ModelRef, ModelRegistry, PatternOverlay, RiskView, ScoreSoFar, Session,
    SessionMode, SessionSpec, StateView, SuggestionSource, SuggestionView, TileRisk,
};
pub use store::{read_log, replay, ActionLog, LogEntry, StoreError};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::collections::HashMap;
use std::future::Future;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};
use tokio::net::TcpListener;
use tokio::sync::{Mutex, RwLock};

/// Loopback only; the API has no authentication.
pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// Directory for action logs; `None` keeps sessions in memory only.
    pub data_dir: Option<PathBuf>,
    pub models: ModelRegistry,
}

struct Inner {
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    models: ModelRegistry,
    log: Option<ActionLog>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

impl AppState {
    /// Open the data directory and replay every logged session.
    pub fn new(config: ServiceConfig) -> Result<Self, StoreError> {
        let log = config.data_dir.as_deref().map(ActionLog::open).transpose()?;
        let mut sessions = HashMap::new();
        if let Some(log) = &log {
            for id in log.session_ids()? {
                let entries = log.read(&id)?;
                let session = replay(&entries, &config.models).map_err(|source| StoreError::Replay {
                    path: log.dir().join(format!("{id}.jsonl")).display().to_string(),
                    source,
                })?;
                sessions.insert(id, Arc::new(Mutex::new(session)));
            }
        }
        Ok(AppState(Arc::new(Inner { sessions: RwLock::new(sessions), models: config.models, log })))
    }

    pub async fn session_count(&self) -> usize {
        self.0.sessions.read().await.len()
    }

    async fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.0.sessions.read().await.get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }

    /// Write a state snapshot of every session next to its log.
    pub async fn persist_all(&self) -> Result<usize, StoreError> {
        let Some(log) = &self.0.log else {
            return Ok(0);
        };
        let sessions: Vec<_> = self.0.sessions.read().await.values().cloned().collect();
        for s in &sessions {
            log.write_snapshot(&s.lock().await.state_view())?;
        }
        Ok(sessions.len())
    }

    fn append(&self, id: &str, entry: &LogEntry) -> Result<(), ApiError> {
        match &self.0.log {
            Some(log) => log.append(id, entry).map_err(|e| ApiError::internal(e.to_string())),
            None => Ok(()),
        }
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))
}

type Reply<T> = Result<Json<T>, ApiError>;

#[derive(Serialize)]
struct Health {
    status: &'static str,
    models: Vec<String>,
    sessions: usize,
}

async fn health(State(app): State<AppState>) -> Json<Health> {
    let mut models: Vec<String> = app.0.models.keys().map(|k| k.to_string()).collect();
    models.sort();
    Json(Health { status: "ok", models, sessions: app.session_count().await })
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<StateView>), ApiError> {
    let spec: SessionSpec = parse(&body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let at_ms = now_ms();
    let session = Session::create(id.clone(), spec.clone(), &app.0.models, at_ms)?;
    app.append(&id, &LogEntry::Create { id: id.clone(), spec: Box::new(spec), at_ms })?;
    let view = session.state_view();
    app.0.sessions.write().await.insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_state(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Reply<StateView> {
    Ok(Json(app.session(&id).await?.lock().await.state_view()))
}

async fn clear_tile(State(app): State<AppState>, UrlPath(id): UrlPath<String>, body: Bytes) -> Reply<ClearOutcome> {
    let request: ClearRequest = parse(&body)?;
    let handle = app.session(&id).await?;
    let mut session = handle.lock().await;
    let at_ms = now_ms();
    // apply to a copy so a failed log write leaves the session untouched
    let mut next = session.clone();
    let applied_to = next.revision();
    let outcome = next.clear(&request, at_ms)?;
    let logged = ClearRequest { revision: Some(applied_to), ..request };
    app.append(&id, &LogEntry::Clear { request: logged, at_ms })?;
    *session = next;
    Ok(Json(outcome))
}

async fn get_risk(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Reply<RiskView> {
    Ok(Json(app.session(&id).await?.lock().await.risk_view()))
}

async fn get_suggestion(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Reply<SuggestionView> {
    Ok(Json(app.session(&id).await?.lock().await.suggestion()))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no_route", "no such endpoint")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_state))
        .route("/sessions/{id}/clear", post(clear_tile))
        .route("/sessions/{id}/risk", get(get_risk))
        .route("/sessions/{id}/suggestion", get(get_suggestion))
        .fallback(fallback)
        .with_state(state)
}

/// Serve until `shutdown` resolves, then snapshot every session to disk.
pub async fn serve(
    listener: TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state.clone())).with_graceful_shutdown(shutdown).await?;
    match state.persist_all().await {
        Ok(n) => tracing::info!(sessions = n, "sessions persisted"),
        Err(e) => tracing::error!(error = %e, "persisting sessions failed"),
    }
    Ok(())
}
