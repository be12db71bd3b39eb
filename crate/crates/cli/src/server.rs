//! HTTP front end over the session store.

use std::sync::Arc;

use argchat_core::analysis::{chi_square_with, AnalysisError, ChiSquareResult, ContingencyTable, GroupSummary};
use argchat_core::dialogue::{
    Actor, BotMove, DialogueConfig, DialogueError, DialogueState, DoneSummary, EventKind, Prompt, Session, Variant,
};
use argchat_core::store::{next_input_seq, IndexEntry, SessionStatus, SessionStore, StoreError};
use argchat_core::{ArgumentType, Concern, KbError, Policy};
use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

pub struct AppState {
    pub store: SessionStore,
    pub default_kb: String,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/input", post(post_input))
        .route("/sessions/{id}/summary", get(get_summary))
        .route("/analysis/chi-square", post(chi_square))
        .with_state(state)
}

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_seq: Option<u64>,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        Self { status, error, message: message.into(), allowed: None, expected_seq: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        let allowed = e.allowed().map(<[String]>::to_vec);
        let mut err = match &e {
            StoreError::UnknownKb(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_kb", message),
            StoreError::UnknownSession(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_session", message),
            StoreError::Dialogue(DialogueError::Kb(KbError::PolicyUnavailable { .. }))
            | StoreError::Dialogue(DialogueError::InsufficientCounters { .. }) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "policy_unavailable", message)
            }
            StoreError::Dialogue(DialogueError::InvalidInput { .. }) => {
                ApiError::new(StatusCode::CONFLICT, "invalid_input", message)
            }
            StoreError::Dialogue(DialogueError::SessionDone) => {
                ApiError::new(StatusCode::CONFLICT, "session_done", message)
            }
            StoreError::SeqMismatch { expected, .. } => {
                let mut err = ApiError::new(StatusCode::CONFLICT, "seq_conflict", message);
                err.expected_seq = Some(*expected);
                err
            }
            StoreError::NotDone(_) => ApiError::new(StatusCode::CONFLICT, "not_done", message),
            _ => {
                tracing::error!(error = %e, "store failure");
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
            }
        };
        err.allowed = allowed;
        err
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text())
    }
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "sessions": state.store.index().len(),
        "kbs": state.store.kb_ids().collect::<Vec<_>>(),
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateRequest {
    pub variant: Variant,
    pub policy: Policy,
    #[serde(default)]
    pub kb_id: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: String,
    pub prompt: Prompt,
    pub next_seq: u64,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let Json(req) = body?;
    let resp = blocking(move || {
        let kb = req.kb_id.unwrap_or_else(|| state.default_kb.clone());
        let (session_id, prompt) = state.store.create_session(&kb, req.variant, req.policy)?;
        tracing::info!(%session_id, kb, variant = %req.variant, policy = %req.policy, "session created");
        Ok(CreateResponse { session_id, prompt, next_seq: 0 })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(resp)))
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<Vec<IndexEntry>> {
    Json(state.store.index())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputRequest {
    pub seq: u64,
    pub value: String,
}

/// Either the next prompt or, once the session ends, its summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputResponse {
    pub seq: u64,
    pub next_seq: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<Prompt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub done_summary: Option<DoneSummary>,
}

async fn post_input(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<InputRequest>, JsonRejection>,
) -> Result<Json<InputResponse>, ApiError> {
    let Json(req) = body?;
    let resp = blocking(move || {
        let mv = state.store.post_input(&id, req.seq, &req.value)?;
        let (prompt, done_summary) = match mv {
            BotMove::Prompt(p) => (Some(p), None),
            BotMove::Done(d) => (None, Some(d)),
        };
        Ok(InputResponse { seq: req.seq, next_seq: req.seq + 1, prompt, done_summary })
    })
    .await?;
    Ok(Json(resp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub actor: Actor,
    pub kind: EventKind,
    /// Display text; counterargument events are resolved to their wording.
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counter_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg_type: Option<ArgumentType>,
    pub state_after: DialogueState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub kb_id: String,
    pub config: DialogueConfig,
    pub status: SessionStatus,
    pub state: DialogueState,
    pub concern: Option<Concern>,
    pub next_seq: u64,
    pub prompt: Option<Prompt>,
    pub done_summary: Option<DoneSummary>,
    pub transcript: Vec<TranscriptEntry>,
}

fn view(state: &AppState, kb_id: String, s: Session) -> SessionView {
    let engine = state.store.engine(&kb_id);
    let transcript = s
        .events
        .iter()
        .map(|e| {
            let counter = (e.kind == EventKind::Counterargument)
                .then(|| engine.and_then(|en| en.kb().counter(&e.payload)))
                .flatten();
            TranscriptEntry {
                seq: e.seq,
                actor: e.actor,
                kind: e.kind,
                text: counter.map_or_else(|| e.payload.clone(), |c| c.text.clone()),
                counter_id: counter.map(|c| c.id.clone()),
                arg_type: counter.map(|c| c.arg_type),
                state_after: e.state_after,
                timestamp_ms: e.timestamp_ms,
            }
        })
        .collect();
    SessionView {
        session_id: s.id.clone(),
        kb_id,
        config: s.config,
        status: if s.is_done() { SessionStatus::Done } else { SessionStatus::Active },
        state: s.state,
        concern: s.concern,
        next_seq: next_input_seq(&s.events),
        prompt: engine.and_then(|en| en.current_prompt(&s)),
        done_summary: s.done_summary(),
        transcript,
    }
}

async fn get_session(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let (kb_id, s) = state.store.snapshot(&id)?;
    Ok(Json(view(&state, kb_id, s)))
}

async fn get_summary(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<GroupSummary>, ApiError> {
    Ok(Json(state.store.summary(&id)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChiSquareRequest {
    pub table: Vec<Vec<u64>>,
    #[serde(default)]
    pub yates: bool,
}

async fn chi_square(body: Result<Json<ChiSquareRequest>, JsonRejection>) -> Result<Json<ChiSquareResult>, ApiError> {
    let Json(req) = body?;
    let invalid = |e: AnalysisError| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_table", e.to_string());
    let table = ContingencyTable::new(req.table).map_err(invalid)?;
    Ok(Json(chi_square_with(&table, req.yates).map_err(invalid)?))
}
