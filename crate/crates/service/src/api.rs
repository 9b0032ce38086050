//! HTTP routes.
//!
//! | route                         | body                                   |
//! |-------------------------------|----------------------------------------|
//! | `GET /api/session/{id}`       | trials with opaque audio URLs          |
//! | `GET /audio/{token}`          | WAV bytes                              |
//! | `POST /api/response`          | `{session_id, participant_id, trial_index, choice}` |
//! | `GET /api/progress/{pid}`     | stage, counts, training scores         |

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hls_lab_core::experiment::{Choice, Phase, TrainingGrade};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Mutex;

use crate::error::StoreError;
use crate::state::{ParticipantState, Stage};
use crate::store::ExperimentStore;

impl IntoResponse for StoreError {
    fn into_response(self) -> Response {
        let status = match &self {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Conflict(_) => StatusCode::CONFLICT,
            StoreError::BadRequest(_) | StoreError::Json(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Slot = Arc<Mutex<Option<ParticipantState>>>;

/// Shared handler state: the store plus one lock per participant.
#[derive(Clone)]
pub struct AppState {
    store: Arc<ExperimentStore>,
    participants: Arc<Mutex<HashMap<String, Slot>>>,
}

impl AppState {
    pub fn new(store: ExperimentStore) -> Self {
        Self {
            store: Arc::new(store),
            participants: Arc::default(),
        }
    }

    pub fn store(&self) -> &ExperimentStore {
        &self.store
    }

    async fn slot(&self, participant_id: &str) -> Slot {
        self.participants
            .lock()
            .await
            .entry(participant_id.to_string())
            .or_default()
            .clone()
    }
}

/// Loads the participant's state on first use.
fn loaded<'a>(store: &ExperimentStore, pid: &str, slot: &'a mut Option<ParticipantState>) -> Result<&'a mut ParticipantState, StoreError> {
    if slot.is_none() {
        *slot = Some(ParticipantState::replay(store, pid)?);
    }
    Ok(slot.as_mut().expect("just filled"))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/session/{id}", get(get_session))
        .route("/audio/{token}", get(get_audio))
        .route("/api/response", post(post_response))
        .route("/api/progress/{participant}", get(get_progress))
        .with_state(state)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(store: ExperimentStore, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(store))).await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TrialView {
    pub index: usize,
    pub first: String,
    pub second: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub phase: Phase,
    pub feedback: bool,
    pub n_trials: usize,
    pub trials: Vec<TrialView>,
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, StoreError> {
    let plan = app.store.session(&id)?;
    let audio = app.store.audio();
    let url = |item: &str, cond: &str| {
        audio
            .token(item, cond)
            .map(|t| format!("/audio/{t}"))
            .ok_or_else(|| StoreError::Layout(format!("no audio for item '{item}' condition '{cond}'")))
    };
    let trials = plan
        .trials
        .iter()
        .enumerate()
        .map(|(index, t)| {
            Ok(TrialView {
                index,
                first: url(&t.item, &t.first)?,
                second: url(&t.item, &t.second)?,
            })
        })
        .collect::<Result<Vec<_>, StoreError>>()?;
    Ok(Json(SessionView {
        session_id: plan.session_id,
        phase: plan.phase,
        feedback: plan.feedback,
        n_trials: trials.len(),
        trials,
    }))
}

async fn get_audio(State(app): State<AppState>, Path(token): Path<String>) -> Result<Response, StoreError> {
    let path = app
        .store
        .audio_path(&token)
        .ok_or_else(|| StoreError::NotFound(format!("audio '{token}'")))?;
    let bytes = tokio::fs::read(&path).await?;
    Ok((
        [
            (header::CONTENT_TYPE, "audio/wav".to_string()),
            (header::CONTENT_LENGTH, bytes.len().to_string()),
            (header::CACHE_CONTROL, "no-store".to_string()),
        ],
        bytes,
    )
        .into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResponseBody {
    pub session_id: String,
    pub participant_id: String,
    pub trial_index: usize,
    pub choice: Choice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub participant_id: String,
    pub phase: Stage,
    pub session_id: Option<String>,
    pub completed_trials: usize,
    pub total_trials: usize,
    pub responses: usize,
    pub training_attempt: u32,
    pub training_correct: usize,
    pub training_history: Vec<TrainingGrade>,
}

impl From<&ParticipantState> for Progress {
    fn from(s: &ParticipantState) -> Self {
        Progress {
            participant_id: s.participant_id.clone(),
            phase: s.stage,
            session_id: s.session_id.clone(),
            completed_trials: s.answered.len(),
            total_trials: s.total_trials,
            responses: s.responses,
            training_attempt: s.training_attempt,
            training_correct: s.training_correct,
            training_history: s.training_history.clone(),
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

async fn post_response(State(app): State<AppState>, body: Bytes) -> Result<Response, StoreError> {
    let body: ResponseBody =
        serde_json::from_slice(&body).map_err(|e| StoreError::BadRequest(format!("malformed response: {e}")))?;
    // Unknown ids are 404 regardless of any other problem with the request.
    let enrollment = app.store.enrollment(&body.participant_id)?;
    app.store.session(&body.session_id)?;
    let slot = app.slot(&enrollment.participant_id).await;
    let mut guard = slot.lock().await;
    let state = loaded(&app.store, &enrollment.participant_id, &mut guard)?;
    let record = state.record_for(&body.session_id, body.trial_index, body.choice, now_ms())?;
    app.store.append(&record)?;
    let accepted = state.apply(&app.store, record)?;
    let feedback = accepted.correct.map(|c| json!({ "correct": c }));
    let progress = Progress::from(&*state);
    Ok((
        StatusCode::CREATED,
        Json(json!({
            "recorded": true,
            "trial_index": body.trial_index,
            "feedback": feedback,
            "completed": accepted.completed,
            "progress": progress,
        })),
    )
        .into_response())
}

async fn get_progress(State(app): State<AppState>, Path(pid): Path<String>) -> Result<Json<Progress>, StoreError> {
    app.store.enrollment(&pid)?;
    let slot = app.slot(&pid).await;
    let mut guard = slot.lock().await;
    let state = loaded(&app.store, &pid, &mut guard)?;
    Ok(Json(Progress::from(&*state)))
}
