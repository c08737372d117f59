//! HTTP routes. Every mutating request runs load → engine step → save while
//! holding the session's lock, so requests to one session are totally ordered
//! and a 2xx response always describes what is on disk.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use botshape_core::engine::EngineError;
use botshape_core::persistence::{
    CharacterDocument, FileStore, SessionDocument, SessionSummary, StoreError,
};
use botshape_core::session::is_valid_session_id;
use botshape_core::{AttributeId, DomainError, Engine, Session, TurnOutput};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Clone)]
pub struct AppState {
    engine: Arc<Engine>,
    store: Arc<FileStore>,
    locks: Arc<Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>>,
}

impl AppState {
    pub fn new(engine: Engine, store: FileStore) -> Self {
        AppState {
            engine: Arc::new(engine),
            store: Arc::new(store),
            locks: Arc::default(),
        }
    }

    pub fn store(&self) -> &FileStore {
        &self.store
    }

    fn lock_for(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table poisoned")
            .entry(id.to_string())
            .or_default()
            .clone()
    }

    /// Runs `step` on the stored session under its lock and persists the result.
    async fn mutate<T, F>(&self, id: String, step: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&Engine, &mut Session) -> Result<T, ApiError> + Send + 'static,
    {
        if !is_valid_session_id(&id) {
            return Err(ApiError::session_not_found(&id));
        }
        let lock = self.lock_for(&id);
        let _guard = lock.lock().await;
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let mut session = state.store.load(&id)?;
            let out = step(&state.engine, &mut session)?;
            state.store.save(&session)?;
            Ok(out)
        })
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.to_string(),
            message: message.into(),
        }
    }

    fn session_not_found(id: &str) -> Self {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "NotFound",
            format!("session {id:?} not found"),
        )
    }

    fn internal(message: String) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error_code": self.code, "message": self.message }));
        (self.status, body).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match e {
            EngineError::NoCandidatesPending => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<DomainError> for ApiError {
    fn from(e: DomainError) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string())
    }
}

/// JSON body parsing with our error shape instead of axum's plain-text rejection.
fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body)
        .map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

#[derive(Debug, Serialize)]
pub struct StateSummary {
    pub mode: &'static str,
    pub phase: &'static str,
    pub guided_defined_count: usize,
    pub switch_hint_shown: bool,
    pub defined_attributes: usize,
    pub message_count: usize,
}

impl From<&Session> for StateSummary {
    fn from(s: &Session) -> Self {
        StateSummary {
            mode: s.engine_state.mode.as_str(),
            phase: s.engine_state.phase.name(),
            guided_defined_count: s.engine_state.guided_defined_count,
            switch_hint_shown: s.engine_state.switch_hint_shown,
            defined_attributes: s.character.len(),
            message_count: s.transcript.len(),
        }
    }
}

#[derive(Debug, Serialize)]
struct PinView {
    message_id: u64,
    pinned_at: u64,
    text: String,
}

fn pins_of(s: &Session) -> Vec<PinView> {
    s.pins
        .iter()
        .filter_map(|p| {
            s.message(p.message_id).map(|m| PinView {
                message_id: p.message_id,
                pinned_at: p.pinned_at,
                text: m.text.clone(),
            })
        })
        .collect()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/attributes", get(list_attributes))
        .route("/api/sessions", get(list_sessions).post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route(
            "/api/sessions/{id}/candidates/{index}",
            post(choose_candidate),
        )
        .route(
            "/api/sessions/{id}/attributes/{attr}",
            delete(delete_attribute),
        )
        .route("/api/sessions/{id}/pins", post(pin))
        .route("/api/sessions/{id}/pins/{message_id}", delete(unpin))
        .with_state(state)
}

async fn list_attributes(State(state): State<AppState>) -> Json<serde_json::Value> {
    let entries: Vec<_> = state
        .engine
        .registry()
        .entries()
        .iter()
        .map(|d| {
            json!({
                "id": d.id,
                "display_name": d.display_name,
                "category": d.category,
                "prompt": d.prompt,
                "suggestible": d.suggestible(),
            })
        })
        .collect();
    Json(serde_json::Value::Array(entries))
}

async fn list_sessions(
    State(state): State<AppState>,
) -> Result<Json<Vec<SessionSummary>>, ApiError> {
    let store = state.store.clone();
    let list = tokio::task::spawn_blocking(move || store.list())
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(list))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    seed: Option<u64>,
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let body: CreateBody = if body.iter().all(u8::is_ascii_whitespace) {
        CreateBody::default()
    } else {
        parse_body(&body)?
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    let seed = body
        .seed
        .unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0);
    let (session, opening) = state.engine.start_session(seed, id.clone(), Utc::now());
    let store = state.store.clone();
    tokio::task::spawn_blocking(move || store.save(&session))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    tracing::info!(session = %id, seed, "session created");
    let body = json!({ "session_id": id, "opening": opening });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionDocument>, ApiError> {
    if !is_valid_session_id(&id) {
        return Err(ApiError::session_not_found(&id));
    }
    let store = state.store.clone();
    let session = tokio::task::spawn_blocking(move || store.load(&id))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(SessionDocument::from(session)))
}

#[derive(Deserialize)]
struct MessageBody {
    text: String,
}

#[derive(Serialize)]
struct TurnResponse {
    turn: TurnOutput,
    state_summary: StateSummary,
}

async fn post_message(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<TurnResponse>, ApiError> {
    let body: MessageBody = parse_body(&body)?;
    let resp = state
        .mutate(id, move |engine, s| {
            let turn = engine.handle_user_message(s, &body.text)?;
            Ok(TurnResponse {
                turn,
                state_summary: StateSummary::from(&*s),
            })
        })
        .await?;
    Ok(Json(resp))
}

async fn choose_candidate(
    State(state): State<AppState>,
    Path((id, index)): Path<(String, String)>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let index: usize = index.parse().map_err(|_| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "IndexOutOfRange",
            format!("bad candidate index {index:?}"),
        )
    })?;
    let turn = state
        .mutate(id, move |engine, s| {
            Ok(engine.handle_candidate_choice(s, index)?)
        })
        .await?;
    Ok(Json(json!({ "turn": turn })))
}

async fn delete_attribute(
    State(state): State<AppState>,
    Path((id, attr)): Path<(String, String)>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let attr = AttributeId::new(attr)?;
    let character = state
        .mutate(id, move |engine, s| {
            engine.handle_delete_attribute(s, &attr);
            Ok(CharacterDocument::from(&s.character))
        })
        .await?;
    Ok(Json(json!({ "character": character })))
}

#[derive(Deserialize)]
struct PinBody {
    message_id: u64,
}

async fn pin(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<serde_json::Value>, ApiError> {
    let body: PinBody = parse_body(&body)?;
    let pins = state
        .mutate(id, move |engine, s| {
            engine.handle_pin(s, body.message_id)?;
            Ok(pins_of(s))
        })
        .await?;
    Ok(Json(json!({ "pins": pins })))
}

async fn unpin(
    State(state): State<AppState>,
    Path((id, message_id)): Path<(String, String)>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let message_id: u64 = message_id.parse().map_err(|_| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "UnknownMessage",
            format!("bad message id {message_id:?}"),
        )
    })?;
    let pins = state
        .mutate(id, move |engine, s| {
            engine.handle_unpin(s, message_id);
            Ok(pins_of(s))
        })
        .await?;
    Ok(Json(json!({ "pins": pins })))
}
