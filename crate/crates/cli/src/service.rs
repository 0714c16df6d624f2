//! HTTP transport for labeling sessions.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use anyhow::Context;
use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde_json::json;

use hdal_core::Strategy;

use crate::session::{LabelsBody, Session, SessionError, SessionRequest};

pub struct ApiError(SessionError);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            SessionError::NotFound(_) => StatusCode::NOT_FOUND,
            SessionError::Conflict(_) => StatusCode::CONFLICT,
            SessionError::Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
            SessionError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

/// Sessions in memory, each behind its own lock so that requests to one
/// session are serialized while distinct sessions proceed independently.
pub struct AppState {
    state_dir: PathBuf,
    data_dir: PathBuf,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
}

impl AppState {
    /// Prepares `state_dir` and reloads every session persisted there.
    pub fn open(state_dir: &Path, data_dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(state_dir).with_context(|| format!("cannot create state dir {}", state_dir.display()))?;
        let probe = state_dir.join(".write-probe");
        fs::write(&probe, b"").with_context(|| format!("state dir {} is not writable", state_dir.display()))?;
        fs::remove_file(&probe).ok();

        let mut sessions = HashMap::new();
        for entry in fs::read_dir(state_dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let session = Session::load(&path, data_dir).with_context(|| format!("reloading session {}", path.display()))?;
            sessions.insert(session.id().to_string(), Arc::new(Mutex::new(session)));
        }
        Ok(Self {
            state_dir: state_dir.to_path_buf(),
            data_dir: data_dir.to_path_buf(),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("session map lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn get(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::NotFound(format!("unknown session `{id}`")).into())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/strategies", get(strategies))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/batch", get(get_batch))
        .route("/sessions/{id}/labels", post(post_labels))
        .route("/sessions/{id}/status", get(get_status))
        .route("/sessions/{id}/curve", get(get_curve))
        .with_state(state)
}

/// Binds `addr` and serves until interrupted.
pub async fn serve(addr: &str, state: AppState) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("cannot listen on {addr}"))?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            tokio::signal::ctrl_c().await.ok();
        })
        .await?;
    Ok(())
}

/// Bodies are parsed by hand so every malformed body is a 422, whatever
/// the content type or the kind of JSON error.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| SessionError::Invalid(format!("malformed body: {e}")).into())
}

/// Runs `f` on the locked session off the async executor.
async fn with_session<T, F>(state: &AppState, id: &str, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> Result<T, SessionError> + Send + 'static,
{
    let session = state.get(id)?;
    tokio::task::spawn_blocking(move || {
        let mut guard = session.lock().map_err(|_| SessionError::Internal("session lock poisoned".into()))?;
        f(&mut guard)
    })
    .await
    .map_err(|e| ApiError(SessionError::Internal(e.to_string())))?
    .map_err(ApiError)
}

async fn strategies() -> Json<serde_json::Value> {
    let names: Vec<&str> = Strategy::ALL.iter().map(|s| s.as_str()).collect();
    Json(json!({ "strategies": names }))
}

async fn create_session(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<impl IntoResponse> {
    let request: SessionRequest = parse_body(&body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let (state_dir, data_dir) = (state.state_dir.clone(), state.data_dir.clone());
    let session = tokio::task::spawn_blocking(move || Session::create(id, request, &data_dir, &state_dir))
        .await
        .map_err(|e| ApiError(SessionError::Internal(e.to_string())))??;
    let id = session.id().to_string();
    state
        .sessions
        .write()
        .expect("session map lock")
        .insert(id.clone(), Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))))
}

async fn get_batch(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_session(&state, &id, |s| s.batch()).await?))
}

async fn post_labels(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<impl IntoResponse> {
    // An unknown session is reported before a malformed body.
    state.get(&id)?;
    let body: LabelsBody = parse_body(&body)?;
    Ok(Json(with_session(&state, &id, move |s| s.submit(&body.labels)).await?))
}

async fn get_status(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_session(&state, &id, |s| Ok(s.status_view())).await?))
}

async fn get_curve(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(with_session(&state, &id, |s| Ok(s.curve())).await?))
}
