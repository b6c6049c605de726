//! HTTP API for steering a maze agent by hand and watching its intelligence
//! change. Commands are JSON request/response; every session also exposes a
//! server-sent event stream.

mod api;
mod session;

use std::future::Future;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::routing::{get, post};
use axum::Router;
use predint_core::maze::MazeWorld;

pub use api::{
    ActionView, ApiError, AppState, EventKind, IntelligenceView, MazeView, SessionEvent, StateView,
    SCHEMA_VERSION,
};
pub use session::{Measurement, Registry, Session, SessionHandle, DEFAULT_IDLE};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(api::create_session))
        .route("/sessions/{id}/state", get(api::get_state))
        .route("/sessions/{id}/action", post(api::post_action))
        .route("/sessions/{id}/learning", post(api::post_learning))
        .route("/sessions/{id}/intelligence", get(api::get_intelligence))
        .route("/sessions/{id}/events", get(api::get_events))
        .with_state(state)
}

pub fn app_state(library: Vec<MazeWorld>, idle: Duration) -> AppState {
    Arc::new(Registry::new(library, idle))
}

/// Serves until `shutdown` resolves, expiring idle sessions once a minute.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let reaper = {
        let state = state.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(Duration::from_secs(60));
            loop {
                tick.tick().await;
                state.expire_idle(Instant::now());
            }
        })
    };
    let sessions = state.clone();
    let result = axum::serve(listener, router(state))
        .with_graceful_shutdown(async move {
            shutdown.await;
            // Dropping the sessions ends their open event streams.
            sessions.clear();
        })
        .await;
    reaper.abort();
    result
}
