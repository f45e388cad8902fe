//! HTTP + WebSocket service for enrolment, transcription and live streaming.
//!
//! Sessions live in memory. Each session's mutations are serialised by its own
//! lock; a trained model is shared as an immutable `Arc` and replaced whole on
//! retraining, so readers see either the old model or the new one.

use std::collections::HashMap;
use std::io::Cursor;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use beatscribe::audio::decode_wav;
use beatscribe::midi::{write_smf, MidiMapping, DEFAULT_PPQ, DEFAULT_TEMPO_BPM};
use beatscribe::pipeline::{load_model, save_model, train_user_model, transcribe, ClassSpec, PipelineError};
use beatscribe::{Clip, DrumEvent, FeatureConfig, Live, Model, OnsetParams, Transcription, CANONICAL_SAMPLE_RATE};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{Mutex, RwLock};
use uuid::Uuid;

use crate::stream::{pcm_to_float, ChunkError, StreamChunk};

const BODY_LIMIT: usize = 256 * 1024 * 1024;

#[derive(Default)]
struct SessionData {
    model: Option<Arc<Model>>,
    last: Option<Transcription>,
}

struct Session {
    created_at: u64,
    data: Mutex<SessionData>,
}

#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Session>>>>,
    data_dir: Option<PathBuf>,
}

impl AppState {
    /// Service state; trained models are written to (and restored from) `data_dir`.
    pub fn new(data_dir: Option<PathBuf>) -> std::io::Result<Self> {
        let state = Self { sessions: Arc::default(), data_dir };
        if let Some(dir) = &state.data_dir {
            std::fs::create_dir_all(dir)?;
            let mut sessions = state.sessions.try_write().expect("fresh lock");
            for entry in std::fs::read_dir(dir)? {
                let path = entry?.path();
                let Some(id) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_suffix(".model.json")) else {
                    continue;
                };
                let Ok(doc) = std::fs::read_to_string(&path) else { continue };
                match load_model::<f64>(&doc) {
                    Ok(model) => {
                        let data = SessionData { model: Some(Arc::new(model)), last: None };
                        sessions.insert(id.to_string(), Arc::new(Session { created_at: now(), data: Mutex::new(data) }));
                    }
                    Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
                }
            }
        }
        Ok(state)
    }

    async fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions.read().await.get(id).cloned().ok_or(ApiError::NotFound)
    }
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug)]
enum ApiError {
    NotFound,
    Conflict(serde_json::Value),
    BadRequest(String),
    Internal(String),
}

impl ApiError {
    fn conflict(msg: &str) -> Self {
        ApiError::Conflict(json!({ "error": msg }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound => (StatusCode::NOT_FOUND, json!({ "error": "unknown session" })),
            ApiError::Conflict(v) => (StatusCode::CONFLICT, v),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({ "error": m })),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": m })),
        };
        (status, Json(body)).into_response()
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::OnsetCountMismatch { found, expected } => ApiError::Conflict(json!({
                "error": e.to_string(),
                "onsets_found": found,
                "expected": expected,
            })),
            other => ApiError::BadRequest(other.to_string()),
        }
    }
}

async fn blocking<R: Send + 'static>(f: impl FnOnce() -> R + Send + 'static) -> Result<R, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::Internal(e.to_string()))
}

fn decode_clip(bytes: &[u8]) -> Result<Clip, ApiError> {
    decode_wav(Cursor::new(bytes), CANONICAL_SAMPLE_RATE).map_err(|e| ApiError::BadRequest(format!("audio: {e}")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(session_info))
        .route("/api/sessions/{id}/train", post(train))
        .route("/api/sessions/{id}/transcribe", post(transcribe_clip))
        .route("/api/sessions/{id}/midi", get(midi))
        .route("/api/sessions/{id}/model", get(model_document))
        .route("/api/sessions/{id}/live", get(live))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

#[derive(Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub state: String,
    pub created_at: u64,
    pub model_id: Option<String>,
}

async fn create_session(State(state): State<AppState>) -> (StatusCode, Json<SessionInfo>) {
    let id = Uuid::new_v4().simple().to_string();
    let created_at = now();
    let session = Arc::new(Session { created_at, data: Mutex::default() });
    state.sessions.write().await.insert(id.clone(), session);
    tracing::info!(%id, "session created");
    (StatusCode::CREATED, Json(SessionInfo { id, state: "empty".into(), created_at, model_id: None }))
}

async fn session_info(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionInfo>, ApiError> {
    let session = state.session(&id).await?;
    let data = session.data.lock().await;
    Ok(Json(SessionInfo {
        id,
        state: if data.model.is_some() { "trained" } else { "empty" }.into(),
        created_at: session.created_at,
        model_id: data.model.as_ref().map(|m| m.id().to_string()),
    }))
}

#[derive(Serialize, Deserialize)]
pub struct TrainSummary {
    pub onsets_found: usize,
    pub expected: usize,
    pub selected_features: Vec<String>,
    pub training_accuracy: f64,
    pub model_id: String,
}

async fn train(State(state): State<AppState>, Path(id): Path<String>, mut form: Multipart) -> Result<Json<TrainSummary>, ApiError> {
    let session = state.session(&id).await?;
    let mut audio: Option<Bytes> = None;
    let mut classes: Option<String> = None;
    let mut k = 1usize;
    while let Some(field) = form.next_field().await.map_err(|e| ApiError::BadRequest(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| ApiError::BadRequest(e.to_string()))?;
        match name.as_str() {
            "audio" => audio = Some(bytes),
            "classes" => classes = Some(String::from_utf8_lossy(&bytes).trim().to_string()),
            "k" => {
                k = String::from_utf8_lossy(&bytes)
                    .trim()
                    .parse()
                    .map_err(|_| ApiError::BadRequest("k must be a positive integer".into()))?
            }
            other => return Err(ApiError::BadRequest(format!("unexpected field {other:?}"))),
        }
    }
    let audio = audio.ok_or_else(|| ApiError::BadRequest("missing field \"audio\"".into()))?;
    let spec: ClassSpec = classes
        .ok_or_else(|| ApiError::BadRequest("missing field \"classes\"".into()))?
        .parse()
        .map_err(|e: PipelineError| ApiError::BadRequest(e.to_string()))?;

    let mut data = session.data.lock().await;
    let expected = spec.total();
    let model = blocking(move || {
        let clip = decode_clip(&audio)?;
        Ok::<_, ApiError>(train_user_model(&clip, &spec, &FeatureConfig::default(), &OnsetParams::default(), k)?)
    })
    .await??;
    if let Some(dir) = &state.data_dir {
        let path = dir.join(format!("{id}.model.json"));
        std::fs::write(&path, save_model(&model)).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
    }
    let summary = TrainSummary {
        onsets_found: expected,
        expected,
        selected_features: model.selected_feature_names().iter().map(|s| s.to_string()).collect(),
        training_accuracy: model.training_accuracy(),
        model_id: model.id().to_string(),
    };
    tracing::info!(%id, model = %summary.model_id, "trained");
    data.model = Some(Arc::new(model));
    data.last = None;
    Ok(Json(summary))
}

async fn transcribe_clip(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Json<Transcription>, ApiError> {
    let session = state.session(&id).await?;
    let mut data = session.data.lock().await;
    let model = data.model.clone().ok_or_else(|| ApiError::conflict("session has no trained model"))?;
    let t = blocking(move || {
        let clip = decode_clip(&body)?;
        Ok::<_, ApiError>(transcribe(&clip, &model)?)
    })
    .await??;
    data.last = Some(t.clone());
    Ok(Json(t))
}

#[derive(Deserialize)]
struct MidiQuery {
    tempo: Option<f64>,
}

async fn midi(State(state): State<AppState>, Path(id): Path<String>, Query(q): Query<MidiQuery>) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let data = session.data.lock().await;
    let t = data.last.as_ref().ok_or_else(|| ApiError::conflict("no transcription yet"))?;
    let bytes = write_smf(t, &MidiMapping::default(), q.tempo.unwrap_or(DEFAULT_TEMPO_BPM), DEFAULT_PPQ)
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "audio/midi")], bytes).into_response())
}

async fn model_document(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = state.session(&id).await?;
    let model = session.data.lock().await.model.clone().ok_or_else(|| ApiError::conflict("session has no trained model"))?;
    Ok(([(header::CONTENT_TYPE, "application/json")], save_model(&model)).into_response())
}

async fn live(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ws: Result<WebSocketUpgrade, WebSocketUpgradeRejection>,
) -> Result<Response, ApiError> {
    // workflow errors take precedence over a malformed upgrade
    let session = state.session(&id).await?;
    let model = session.data.lock().await.model.clone().ok_or_else(|| ApiError::conflict("session has no trained model"))?;
    let ws = match ws {
        Ok(ws) => ws,
        Err(rejection) => return Ok(rejection.into_response()),
    };
    let transcriber = Live::new(model).map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(ws.on_upgrade(move |socket| async move {
        if let Err(e) = live_loop(socket, transcriber).await {
            tracing::debug!(%id, "live stream ended: {e}");
        }
    }))
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LiveMessage<'a> {
    Event(&'a DrumEvent),
    Done { events: usize },
    Error { message: String },
}

async fn send(socket: &mut WebSocket, msg: &LiveMessage<'_>) -> Result<(), axum::Error> {
    let text = serde_json::to_string(msg).expect("live messages serialise");
    socket.send(Message::Text(text.into())).await
}

async fn live_loop(mut socket: WebSocket, mut transcriber: Live) -> Result<(), axum::Error> {
    let mut expected = 0u32;
    let mut emitted = 0usize;
    while let Some(msg) = socket.recv().await {
        let bytes = match msg? {
            Message::Binary(b) => b,
            Message::Close(_) => return Ok(()),
            Message::Ping(_) | Message::Pong(_) => continue,
            Message::Text(_) => {
                send(&mut socket, &LiveMessage::Error { message: "expected binary audio chunks".into() }).await?;
                return socket.send(Message::Close(None)).await;
            }
        };
        let chunk = match StreamChunk::decode(&bytes).and_then(|c| {
            if c.sequence == expected {
                Ok(c)
            } else {
                Err(ChunkError::Sequence { expected, found: c.sequence })
            }
        }) {
            Ok(c) => c,
            Err(e) => {
                send(&mut socket, &LiveMessage::Error { message: e.to_string() }).await?;
                return socket.send(Message::Close(None)).await;
            }
        };
        expected = expected.wrapping_add(1);
        let last = chunk.last;
        let (t, events) = tokio::task::spawn_blocking(move || {
            let mut events = transcriber.push(&pcm_to_float(&chunk.samples));
            if last {
                events.extend(transcriber.finish());
            }
            (transcriber, events)
        })
        .await
        .map_err(axum::Error::new)?;
        transcriber = t;
        for e in &events {
            send(&mut socket, &LiveMessage::Event(e)).await?;
        }
        emitted += events.len();
        if last {
            send(&mut socket, &LiveMessage::Done { events: emitted }).await?;
            return socket.send(Message::Close(None)).await;
        }
    }
    Ok(())
}
