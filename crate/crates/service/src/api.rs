use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use pwr_advisor::plant::PowerProfile;
use pwr_advisor::scenario::{Sample, ScenarioConfig, ScenarioFile, StrategySection};
use pwr_advisor::ScenarioError;

use crate::registry::{AppState, Clock, SessionHandle};
use crate::session::{EditAck, SessionError};

/// Error body: `{"error": kind, "message": text, "field": path?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            error: error.to_string(),
            message: message.into(),
            field: None,
        }
    }

    fn not_found(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("no session `{id}`"))
    }

    fn invalid(field: Option<String>, message: impl Into<String>) -> Self {
        ApiError {
            field,
            ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", message)
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<ScenarioError> for ApiError {
    fn from(e: ScenarioError) -> Self {
        match &e {
            ScenarioError::Validation { field, .. } => ApiError::invalid(Some(field.clone()), e.to_string()),
            _ => ApiError::invalid(None, e.to_string()),
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        ApiError::invalid(None, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

/// Parse a JSON body, reporting the path of the offending field.
fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = (path != "." && !path.is_empty()).then_some(path);
        ApiError::invalid(field, e.into_inner().to_string())
    })
}

/// Response of `POST /sessions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
    /// Simulated time of the initial state, s.
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockMode {
    Run,
    Pause,
}

/// Body of `POST /sessions/{id}/clock`. Omitted fields keep their value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockCommand {
    #[serde(default)]
    pub mode: Option<ClockMode>,
    /// Simulated seconds per wall second, in [0, 10000].
    #[serde(default)]
    pub speedup: Option<f64>,
}

/// Most simulated seconds per wall second a client may request.
const MAX_SPEEDUP: f64 = 10_000.0;

/// Body of `POST /sessions/{id}/profile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileBody {
    profile: PowerProfile,
}

/// Response of `GET /sessions/{id}/state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePage {
    /// Current simulated time, s.
    pub now: f64,
    pub clock: Clock,
    /// Samples strictly after the requested `since` (all when omitted).
    pub samples: Vec<Sample>,
    /// Last plant or engine failure, if any; the clock is paused then.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Deserialize)]
struct SinceQuery {
    #[serde(default)]
    since: Option<f64>,
}

/// Build the service router.
pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", delete(remove))
        .route("/sessions/{id}/profile", post(set_profile))
        .route("/sessions/{id}/strategy", post(set_strategy))
        .route("/sessions/{id}/clock", post(set_clock))
        .route("/sessions/{id}/state", get(get_state))
        .route("/sessions/{id}/recommendation", get(get_recommendation))
        .with_state(state)
}

fn session(state: &AppState, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
    state.get(id).ok_or_else(|| ApiError::not_found(id))
}

/// Run a live-session edit off the async executor.
async fn edit<R: Send + 'static>(
    handle: Arc<SessionHandle>,
    f: impl FnOnce(&mut crate::LiveSession) -> R + Send + 'static,
) -> Result<R, ApiError> {
    tokio::task::spawn_blocking(move || handle.with_live(f))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))
}

async fn create(State(state): State<AppState>, body: Bytes) -> Result<(StatusCode, Json<Created>), ApiError> {
    let config = if body.iter().all(u8::is_ascii_whitespace) {
        state.default_scenario().clone()
    } else {
        let file: ScenarioFile = parse_body(&body)?;
        ScenarioConfig::from_file(file)?
    };
    let handle = state.create(config)?;
    Ok((
        StatusCode::CREATED,
        Json(Created {
            id: handle.id.clone(),
            t: handle.now(),
        }),
    ))
}

async fn remove(State(state): State<AppState>, Path(id): Path<String>) -> Result<StatusCode, ApiError> {
    if state.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::not_found(&id))
    }
}

async fn set_profile(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<EditAck>, ApiError> {
    let handle = session(&state, &id)?;
    let ProfileBody { profile } = parse_body(&body)?;
    profile
        .validate()
        .map_err(|e| ApiError::invalid(Some("profile".into()), e.to_string()))?;
    let ack = edit(handle, move |live| live.set_profile(profile)).await?;
    Ok(Json(ack.map_err(|e| ApiError::invalid(Some("profile".into()), e.to_string()))?))
}

async fn set_strategy(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<EditAck>, ApiError> {
    let handle = session(&state, &id)?;
    let section: StrategySection = parse_body(&body)?;
    let ack = edit(handle, move |live| live.set_strategy(&section)).await?;
    Ok(Json(ack?))
}

async fn set_clock(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<Clock>, ApiError> {
    let handle = session(&state, &id)?;
    let cmd: ClockCommand = parse_body(&body)?;
    let mut clock = handle.clock();
    if let Some(speedup) = cmd.speedup {
        if !(0.0..=MAX_SPEEDUP).contains(&speedup) {
            return Err(ApiError::invalid(
                Some("speedup".into()),
                format!("speedup {speedup} outside [0, {MAX_SPEEDUP}]"),
            ));
        }
        clock.speedup = speedup;
    }
    if let Some(mode) = cmd.mode {
        clock.running = mode == ClockMode::Run;
    }
    handle.set_clock(clock);
    Ok(Json(clock))
}

async fn get_state(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SinceQuery>,
) -> Result<Json<StatePage>, ApiError> {
    let handle = session(&state, &id)?;
    Ok(Json(StatePage {
        now: handle.now(),
        clock: handle.clock(),
        samples: handle.samples_since(q.since.unwrap_or(0.0)),
        error: handle.last_error(),
    }))
}

async fn get_recommendation(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let handle = session(&state, &id)?;
    Ok(match handle.recommendation() {
        Some(payload) => Json(payload.as_ref().clone()).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}
