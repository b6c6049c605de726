use std::convert::Infallible;
use std::sync::{Arc, Weak};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::Json;
use futures::Stream;
use predint_core::maze::{Action, AgentPose, MazeWorld, SensorState, Step};
use predint_core::CategoricalDistribution;
use serde::{Deserialize, Serialize};

use crate::session::{Measurement, Registry, Session, SessionHandle};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code,
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::NOT_FOUND,
            code: "unknown_session",
            message: message.into(),
        }
    }

    pub fn internal(err: impl std::fmt::Display) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            code: "internal",
            message: err.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request("bad_json", r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "code": self.code, "message": self.message },
        });
        (self.status, Json(body)).into_response()
    }
}

#[derive(Debug, Serialize)]
pub struct MazeView {
    pub name: String,
    pub width: usize,
    pub height: usize,
    /// One string of `W`, `E` and `R` per row, top row first.
    pub rows: Vec<String>,
}

impl MazeView {
    fn new(world: &MazeWorld) -> Self {
        let grid = world.grid();
        Self {
            name: world.name().to_owned(),
            width: grid.width(),
            height: grid.height(),
            rows: grid.to_text().lines().skip(1).map(str::to_owned).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct StateView {
    pub schema_version: u32,
    pub session_id: String,
    pub maze: MazeView,
    pub pose: AgentPose,
    pub sensors: SensorState,
    pub learning: bool,
    pub known_transitions: usize,
    pub last_seq: u64,
}

impl StateView {
    pub(crate) fn new(s: &Session) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            session_id: s.id.to_string(),
            maze: MazeView::new(&s.world),
            pose: s.agent.pose,
            sensors: s.agent.sensors(&s.world),
            learning: s.agent.learning,
            known_transitions: s.agent.table.len(),
            last_seq: s.last_seq(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ActionView {
    pub schema_version: u32,
    pub seq: u64,
    pub action: Action,
    pub before: SensorState,
    /// The agent's prediction for each sensor, made before acting.
    pub prediction: [CategoricalDistribution; 4],
    pub after: SensorState,
    pub pose: AgentPose,
    pub pm: [f64; 4],
    pub pm_total: f64,
}

impl ActionView {
    pub(crate) fn new(step: &Step, seq: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seq,
            action: step.action,
            before: step.before,
            prediction: step.prediction.clone(),
            after: step.after,
            pose: step.pose,
            pm: step.pm,
            pm_total: step.total_pm(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Action,
    Learning,
    Intelligence,
}

impl EventKind {
    fn name(self) -> &'static str {
        match self {
            EventKind::Action => "action",
            EventKind::Learning => "learning",
            EventKind::Intelligence => "intelligence",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SessionEvent {
    pub schema_version: u32,
    pub seq: u64,
    pub kind: EventKind,
    pub data: serde_json::Value,
}

impl SessionEvent {
    pub(crate) fn new(seq: u64, kind: EventKind, data: serde_json::Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seq,
            kind,
            data,
        }
    }

    fn to_sse(&self) -> Event {
        Event::default()
            .id(self.seq.to_string())
            .event(self.kind.name())
            .data(serde_json::to_string(self).expect("serializable"))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    /// Name of a maze known to the server.
    pub maze: Option<String>,
    /// Maze file text; takes the name given in `name`.
    pub maze_text: Option<String>,
    pub name: Option<String>,
    #[serde(default)]
    pub learning: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRequest {
    pub action: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearningRequest {
    pub on: bool,
}

#[derive(Debug, Deserialize)]
pub struct ScopeQuery {
    /// Comma-separated names of further mazes to measure alongside the
    /// session's own.
    pub scope: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct EventsQuery {
    pub since: Option<u64>,
}

pub type AppState = Arc<Registry>;

pub async fn create_session(
    State(app): State<AppState>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<StateView>), ApiError> {
    let Json(req) = body?;
    let world = match (req.maze, req.maze_text) {
        (Some(name), None) => app.maze(&name).cloned().ok_or_else(|| {
            ApiError::bad_request("unknown_maze", format!("no maze named `{name}`"))
        })?,
        (None, Some(text)) => {
            let name = req.name.unwrap_or_else(|| "custom".to_owned());
            MazeWorld::parse(name, &text)
                .map_err(|e| ApiError::bad_request("bad_maze", e.to_string()))?
        }
        _ => {
            return Err(ApiError::bad_request(
                "bad_request",
                "give exactly one of `maze` and `maze_text`",
            ))
        }
    };
    let handle = app.create(world, req.learning);
    let view = handle.session.lock().await.view();
    Ok((StatusCode::CREATED, Json(view)))
}

pub async fn get_state(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<StateView>, ApiError> {
    let handle = app.get(&id)?;
    let view = handle.session.lock().await.view();
    Ok(Json(view))
}

pub async fn post_action(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ActionRequest>, JsonRejection>,
) -> Result<Json<ActionView>, ApiError> {
    let handle = app.get(&id)?;
    let Json(req) = body?;
    let action: Action = req
        .action
        .parse()
        .map_err(|e: predint_core::Error| ApiError::bad_request("bad_action", e.to_string()))?;
    let mut session = handle.session.lock().await;
    let (step, seq) = session.act(action)?;
    Ok(Json(ActionView::new(&step, seq)))
}

pub async fn post_learning(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<LearningRequest>, JsonRejection>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let handle = app.get(&id)?;
    let Json(req) = body?;
    let changed = handle.session.lock().await.set_learning(req.on);
    Ok(Json(serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "learning": req.on,
        "changed": changed,
    })))
}

#[derive(Debug, Serialize)]
pub struct IntelligenceView {
    pub schema_version: u32,
    #[serde(flatten)]
    pub measurement: Measurement,
}

pub async fn get_intelligence(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ScopeQuery>,
) -> Result<Json<IntelligenceView>, ApiError> {
    let handle = app.get(&id)?;
    let mut others = Vec::new();
    for name in q
        .scope
        .iter()
        .flat_map(|s| s.split(','))
        .map(str::trim)
        .filter(|s| !s.is_empty())
    {
        let world = app.maze(name).ok_or_else(|| {
            ApiError::bad_request("unknown_maze", format!("no maze named `{name}`"))
        })?;
        others.push(world.clone());
    }
    let mut session = handle.session.lock().await;
    let measurement = session.intelligence(&others, &app.compressor)?;
    Ok(Json(IntelligenceView {
        schema_version: SCHEMA_VERSION,
        measurement,
    }))
}

/// Server-sent events: everything after `since` (or the `Last-Event-ID`
/// header), then live events as they happen.
pub async fn get_events(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let handle = app.get(&id)?;
    let since = match q.since {
        Some(s) => s,
        None => match headers.get("last-event-id") {
            Some(v) => v
                .to_str()
                .ok()
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| {
                    ApiError::bad_request("bad_last_event_id", "Last-Event-ID must be an integer")
                })?,
            None => 0,
        },
    };
    let rx = handle.session.lock().await.subscribe();
    let weak: Weak<SessionHandle> = Arc::downgrade(&handle);
    drop(handle);
    let stream = futures::stream::unfold(
        (weak, rx, since, Vec::<SessionEvent>::new()),
        |(weak, mut rx, mut last, mut pending)| async move {
            loop {
                if !pending.is_empty() {
                    let event = pending.remove(0);
                    last = event.seq;
                    return Some((Ok(event.to_sse()), (weak, rx, last, pending)));
                }
                let handle = weak.upgrade()?;
                rx.mark_unchanged();
                pending = handle.session.lock().await.events_after(last);
                drop(handle);
                if pending.is_empty() && rx.changed().await.is_err() {
                    return None;
                }
            }
        },
    );
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
