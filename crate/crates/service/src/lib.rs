//! HTTP front end for live sessions.
//!
//! Every session runs on its own thread against a logical clock (wall time ×
//! `speedup`). Clients post user messages and feed events, and follow the
//! transcript through a server-sent-events stream whose event ids are
//! 1-based transcript positions, so a reconnect with `Last-Event-ID` resumes
//! exactly where it left off.

pub mod generative;
mod runner;

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use companion_core::keywords::{validate_feed_event, FeedError};
use companion_core::sim::config_with_overrides;
use companion_core::{FeedEvent, FeedKind, Resources, Session, Speaker, TranscriptEntry, TurnStats};
use futures::stream::{self, Stream};
use serde::Deserialize;
use serde_json::{json, Map, Value};

pub use generative::HttpGenerative;
pub use runner::Status;
use runner::{Command, SessionHandle};

/// Server-wide settings and the session registry.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

struct Inner {
    resources: Arc<Resources>,
    config: Map<String, Value>,
    transcript_dir: Option<PathBuf>,
    speedup: f64,
    sessions: RwLock<BTreeMap<String, Arc<SessionHandle>>>,
}

impl AppState {
    /// `config` holds session-config overrides applied to every new session;
    /// transcripts are written to `transcript_dir/<id>.jsonl` when given.
    pub fn new(
        resources: Arc<Resources>,
        config: Map<String, Value>,
        transcript_dir: Option<PathBuf>,
        speedup: f64,
    ) -> Self {
        AppState { inner: Arc::new(Inner { resources, config, transcript_dir, speedup, sessions: RwLock::default() }) }
    }

    fn session(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.inner.sessions.read().expect("registry lock").get(id).cloned().ok_or(ApiError::NotFound)
    }

    fn live_session(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        let handle = self.session(id)?;
        if handle.ended() {
            return Err(ApiError::Ended);
        }
        Ok(handle)
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound,
    Ended,
    BadRequest(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::NotFound => (StatusCode::NOT_FOUND, "no such session".to_string()),
            ApiError::Ended => (StatusCode::CONFLICT, "session has ended".to_string()),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/messages", post(post_message))
        .route("/sessions/{id}/feed", post(post_feed))
        .route("/sessions/{id}/cancel", post(cancel))
        .route("/sessions/{id}/end", post(end))
        .route("/sessions/{id}/transcript", get(transcript))
        .route("/sessions/{id}/stats", get(stats))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

/// Serves the API on an already-bound listener until the process stops.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    #[serde(default)]
    config: Map<String, Value>,
    #[serde(default)]
    seed: Option<u64>,
}

fn parse_json<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> Result<T, ApiError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("invalid JSON body: {e}")))
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let request: CreateSession = parse_json(&body)?;
    let mut overrides = state.inner.config.clone();
    overrides.extend(request.config);
    if let Some(seed) = request.seed {
        overrides.insert("rng_seed".into(), json!(seed));
    }
    let config = config_with_overrides(&overrides).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let session =
        Session::new(state.inner.resources.clone(), config).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let id = uuid::Uuid::new_v4().to_string();
    let path = state.inner.transcript_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")));
    let handle = runner::spawn(id.clone(), session, state.inner.speedup, path)
        .map_err(|e| ApiError::Internal(format!("cannot start session: {e}")))?;
    let status = handle.shared.lock().expect("shared lock").status.clone();
    state.inner.sessions.write().expect("registry lock").insert(id, Arc::new(handle));
    Ok((StatusCode::CREATED, Json(status)))
}

async fn list_sessions(State(state): State<AppState>) -> Json<Vec<Status>> {
    let sessions = state.inner.sessions.read().expect("registry lock");
    Json(sessions.values().map(|h| h.shared.lock().expect("shared lock").status.clone()).collect())
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Status>, ApiError> {
    let handle = state.session(&id)?;
    let status = handle.shared.lock().expect("shared lock").status.clone();
    Ok(Json(status))
}

#[derive(Deserialize, Default)]
struct Message {
    text: String,
}

fn dispatch(handle: &SessionHandle, command: Command) -> Result<(), ApiError> {
    if handle.send(command) {
        Ok(())
    } else {
        Err(ApiError::Ended)
    }
}

async fn post_message(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let handle = state.live_session(&id)?;
    let message: Message = parse_json(&body)?;
    if message.text.trim().is_empty() {
        return Err(ApiError::BadRequest("text must not be empty".into()));
    }
    dispatch(&handle, Command::Say(message.text))?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "accepted": true }))))
}

#[derive(Deserialize)]
struct FeedInput {
    kind: FeedKind,
    text: String,
    #[serde(default)]
    confidence: Option<f64>,
}

async fn post_feed(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let handle = state.live_session(&id)?;
    let input: FeedInput =
        serde_json::from_slice(&body).map_err(|e| ApiError::BadRequest(format!("invalid feed event: {e}")))?;
    let event = FeedEvent { t: 0.0, kind: input.kind, text: input.text, confidence: input.confidence };
    validate_feed_event(&event).map_err(|e| {
        ApiError::BadRequest(match e {
            FeedError::EmptyCaption { .. } => "caption text is empty".into(),
            FeedError::BadConfidence { value, .. } => format!("confidence {value} outside [0, 1]"),
            other => other.to_string(),
        })
    })?;
    dispatch(&handle, Command::Feed(event))?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "accepted": true }))))
}

async fn cancel(State(state): State<AppState>, Path(id): Path<String>) -> Result<impl IntoResponse, ApiError> {
    let handle = state.live_session(&id)?;
    dispatch(&handle, Command::Cancel)?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "accepted": true }))))
}

async fn end(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let handle = state.live_session(&id)?;
    let (tx, rx) = tokio::sync::oneshot::channel();
    dispatch(&handle, Command::End(tx))?;
    rx.await.map_err(|_| ApiError::Ended)?;
    let shared = handle.shared.lock().expect("shared lock");
    Ok(Json(json!({
        "status": shared.status,
        "stats": TurnStats::from_entries(&shared.entries),
    })))
}

async fn transcript(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Vec<TranscriptEntry>>, ApiError> {
    let handle = state.session(&id)?;
    let entries = handle.shared.lock().expect("shared lock").entries.clone();
    Ok(Json(entries))
}

async fn stats(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<TurnStats>, ApiError> {
    let handle = state.session(&id)?;
    let shared = handle.shared.lock().expect("shared lock");
    Ok(Json(TurnStats::from_entries(&shared.entries)))
}

/// Stream event name for a transcript entry.
pub fn event_name(entry: &TranscriptEntry) -> String {
    match (entry.speaker, &entry.event) {
        (Speaker::Robot, _) => "robot_utterance".into(),
        (Speaker::User, _) => "user_utterance".into(),
        (Speaker::System, Some(event)) => serde_json::to_value(event)
            .ok()
            .and_then(|v| v.get("type").and_then(Value::as_str).map(str::to_string))
            .unwrap_or_else(|| "system".into()),
        (Speaker::System, None) => "system".into(),
    }
}

#[derive(Deserialize)]
struct EventsQuery {
    cursor: Option<usize>,
}

async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let handle = state.session(&id)?;
    let resume =
        headers.get("last-event-id").and_then(|v| v.to_str().ok()).and_then(|v| v.trim().parse::<usize>().ok());
    let cursor = resume.or(query.cursor).unwrap_or(0);
    let updates = handle.updates.clone();
    let stream = stream::unfold((handle, updates, cursor), |(handle, mut updates, cursor)| async move {
        loop {
            {
                let shared = handle.shared.lock().expect("shared lock");
                if let Some(entry) = shared.entries.get(cursor) {
                    let event = Event::default()
                        .event(event_name(entry))
                        .id((cursor + 1).to_string())
                        .json_data(entry)
                        .expect("entries serialize");
                    drop(shared);
                    return Some((Ok(event), (handle, updates, cursor + 1)));
                }
                if shared.status.ended {
                    return None;
                }
            }
            if updates.changed().await.is_err() && handle.ended() {
                // Publisher gone; drain whatever is left, then stop.
                let len = handle.shared.lock().expect("shared lock").entries.len();
                if cursor >= len {
                    return None;
                }
            }
        }
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
