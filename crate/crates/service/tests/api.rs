use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use predint_core::complexity::CompressorSpec;
use predint_core::maze::{builtins, evaluate, replay, Action};
use predint_core::measure::{measure, Baseline, DEFAULT_ALPHA};
use predint_service::{app_state, router, AppState, DEFAULT_IDLE};
use serde_json::{json, Value};
use tower::ServiceExt;

// Hellinger distance of a one-hot distribution from uniform over three labels.
const PERFECT: f64 = 0.650_115_167_343_736_3;
const ONE_CELL: &str = "3 3\nWWW\nWEW\nWWW\n";

fn app() -> (Router, AppState) {
    let state = app_state(builtins(), DEFAULT_IDLE);
    (router(state.clone()), state)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
    (status, value)
}

async fn session(app: &Router, body: Value) -> String {
    let (status, v) = call(app, "POST", "/sessions", Some(body)).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_owned()
}

async fn act(app: &Router, id: &str, action: &str) -> Value {
    let (status, v) = call(
        app,
        "POST",
        &format!("/sessions/{id}/action"),
        Some(json!({ "action": action })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v
}

async fn learning(app: &Router, id: &str, on: bool) -> Value {
    let (status, v) = call(
        app,
        "POST",
        &format!("/sessions/{id}/learning"),
        Some(json!({ "on": on })),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    v
}

fn sensors(v: &Value) -> String {
    v.as_array()
        .unwrap()
        .iter()
        .map(|c| c.as_str().unwrap())
        .collect()
}

#[tokio::test]
async fn create_from_builtin_and_text() {
    let (app, _) = app();
    let (status, v) = call(&app, "POST", "/sessions", Some(json!({ "maze": "t-maze" }))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(sensors(&v["sensors"]), "WEWE");
    assert_eq!(v["maze"]["rows"].as_array().unwrap().len(), 12);

    let (_, v) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({ "maze_text": ONE_CELL, "name": "cell" })),
    )
    .await;
    assert_eq!(sensors(&v["sensors"]), "WWWE");
    assert_eq!(v["maze"]["name"], "cell");
}

#[tokio::test]
async fn create_errors() {
    let (app, _) = app();
    let (status, v) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({ "maze_text": "3 3\nWWW\nWXW\nWWW" })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "bad_maze");
    assert!(
        v["error"]["message"].as_str().unwrap().contains("line 3"),
        "{v}"
    );

    let (status, v) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({ "maze": "nowhere" })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "unknown_maze");

    let (status, _) = call(&app, "POST", "/sessions", Some(json!({}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, v) = call(&app, "POST", "/sessions", Some(json!({ "maze": 3 }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "bad_json");
}

#[tokio::test]
async fn unknown_session_and_bad_action() {
    let (app, _) = app();
    for uri in [
        "/sessions/nope/state",
        "/sessions/00000000-0000-0000-0000-000000000000/intelligence",
    ] {
        let (status, v) = call(&app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert_eq!(v["error"]["code"], "unknown_session");
    }
    let id = session(&app, json!({ "maze": "t-maze" })).await;
    let (status, v) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/action"),
        Some(json!({ "action": "jump" })),
    )
    .await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "bad_action");
    let (status, _) = call(&app, "GET", "/sessions/nope/events", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn blocked_move_and_unseen_key() {
    let (app, _) = app();
    let id = session(&app, json!({ "maze_text": ONE_CELL })).await;
    let v = act(&app, &id, "move").await;
    assert_eq!(sensors(&v["before"]), "WWWE");
    assert_eq!(sensors(&v["after"]), "WWWE");
    assert_eq!(v["pose"], json!({ "x": 1, "y": 1, "orientation": "up" }));
    // Nothing learnt yet: uniform predictions, zero match.
    assert_eq!(v["pm"], json!([0.0, 0.0, 0.0, 0.0]));
    assert_eq!(v["prediction"][0]["probs"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn learned_transition_scores_perfectly() {
    let (app, _) = app();
    let id = session(&app, json!({ "maze_text": ONE_CELL, "learning": true })).await;
    act(&app, &id, "move").await;
    let v = act(&app, &id, "move").await;
    for pm in v["pm"].as_array().unwrap() {
        assert!((pm.as_f64().unwrap() - PERFECT).abs() < 1e-12);
    }
    assert!((v["pm_total"].as_f64().unwrap() - 4.0 * PERFECT).abs() < 1e-12);
    assert_eq!(v["prediction"][3]["probs"], json!([0.0, 1.0, 0.0]));
}

#[tokio::test]
async fn learning_toggle() {
    let (app, _) = app();
    let id = session(&app, json!({ "maze": "t-maze" })).await;
    assert_eq!(learning(&app, &id, false).await["changed"], false);
    assert_eq!(learning(&app, &id, true).await["changed"], true);
    assert_eq!(learning(&app, &id, true).await["changed"], false);
    assert_eq!(learning(&app, &id, false).await["changed"], true);
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["learning"], false);
    assert_eq!(state["known_transitions"], 0);
    // Two real changes, two events.
    assert_eq!(state["last_seq"], 2);

    // Measuring never alters what was learnt.
    learning(&app, &id, true).await;
    act(&app, &id, "move").await;
    call(&app, "GET", &format!("/sessions/{id}/intelligence"), None).await;
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["known_transitions"], 1);
    assert_eq!(state["learning"], true);
}

#[tokio::test]
async fn intelligence_scope_and_cache() {
    let (app, _) = app();
    let id = session(&app, json!({ "maze": "straight-line" })).await;
    let uri = format!("/sessions/{id}/intelligence");
    let (status, v) = call(&app, "GET", &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["result"]["intelligence"], 0.0);
    assert!(v["max_intelligence"].as_f64().unwrap() > 0.0);

    // A repeated query is served from the cache without a new event.
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    call(&app, "GET", &uri, None).await;
    let (_, again) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["last_seq"], again["last_seq"]);

    let (_, v) = call(&app, "GET", &format!("{uri}?scope=t-maze,u-maze"), None).await;
    let factor = v["result"]["joint_factor"].as_f64().unwrap();
    assert!(factor > 0.0 && factor <= 1.0);
    assert_eq!(
        v["result"]["umwelt_ids"],
        json!(["straight-line", "t-maze", "u-maze"])
    );

    let (status, _) = call(&app, "GET", &format!("{uri}?scope=nowhere"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn learning_invalidates_cached_measurement() {
    let (app, _) = app();
    let id = session(&app, json!({ "maze": "straight-line", "learning": true })).await;
    let uri = format!("/sessions/{id}/intelligence");
    let (_, before) = call(&app, "GET", &uri, None).await;
    for a in ["move", "move", "face_down", "move"] {
        act(&app, &id, a).await;
    }
    let (_, after) = call(&app, "GET", &uri, None).await;
    assert!(after["result"]["pm_total"].as_f64() > before["result"]["pm_total"].as_f64());
}

fn tour() -> Vec<Action> {
    // Walk up the corridor trying every action at each cell, then back down.
    let mut actions = Vec::new();
    for _ in 0..10 {
        for a in [
            Action::FaceLeft,
            Action::FaceRight,
            Action::FaceDown,
            Action::FaceUp,
        ] {
            actions.push(a);
            actions.push(Action::Move);
            actions.push(Action::FaceUp);
        }
        actions.push(Action::Move);
    }
    actions.push(Action::FaceDown);
    actions.extend(std::iter::repeat_n(Action::Move, 10));
    actions
}

#[tokio::test]
async fn manual_tour_matches_offline_replay() {
    let (app, _) = app();
    let id = session(&app, json!({ "maze": "straight-line", "learning": true })).await;
    let actions = tour();
    for a in &actions {
        act(&app, &id, a.name()).await;
    }
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}/intelligence"), None).await;

    let world = builtins()
        .into_iter()
        .find(|w| w.name() == "straight-line")
        .unwrap();
    let agent = replay(&world, &actions).unwrap();
    let (expected, _) = measure(
        &[evaluate(&world, &agent.table).unwrap()],
        &CompressorSpec::default(),
        &Baseline::Uniform,
        DEFAULT_ALPHA,
    )
    .unwrap();
    assert_eq!(v["result"], serde_json::to_value(&expected).unwrap());
    assert!(expected.intelligence > 0.0);
}

#[tokio::test]
async fn concurrent_actions_are_serialized() {
    let (app, _) = app();
    let id = session(&app, json!({ "maze": "t-maze", "learning": true })).await;
    let names = [
        "move",
        "face_left",
        "move",
        "face_right",
        "move",
        "face_down",
        "move",
        "face_up",
    ];
    let mut tasks = Vec::new();
    for i in 0..40 {
        let (app, id) = (app.clone(), id.clone());
        tasks.push(tokio::spawn(async move {
            act(&app, &id, names[i % names.len()]).await
        }));
    }
    let mut results = Vec::new();
    for t in tasks {
        results.push(t.await.unwrap());
    }
    results.sort_by_key(|v| v["seq"].as_u64());
    let seqs: Vec<u64> = results.iter().map(|v| v["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, (1..=40).collect::<Vec<_>>());

    let log: Vec<Action> = results
        .iter()
        .map(|v| v["action"].as_str().unwrap().parse().unwrap())
        .collect();
    let world = builtins()
        .into_iter()
        .find(|w| w.name() == "t-maze")
        .unwrap();
    let agent = replay(&world, &log).unwrap();
    let (_, state) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["pose"], serde_json::to_value(agent.pose).unwrap());
    let (expected, _) = measure(
        &[evaluate(&world, &agent.table).unwrap()],
        &CompressorSpec::default(),
        &Baseline::Uniform,
        DEFAULT_ALPHA,
    )
    .unwrap();
    let (_, v) = call(&app, "GET", &format!("/sessions/{id}/intelligence"), None).await;
    assert_eq!(v["result"], serde_json::to_value(&expected).unwrap());
}

/// Reads server-sent events from `body` until `count` have arrived.
async fn read_events(body: &mut Body, count: usize) -> Vec<(u64, String, Value)> {
    let mut text = String::new();
    let mut out = Vec::new();
    while out.len() < count {
        let frame = tokio::time::timeout(Duration::from_secs(5), body.frame())
            .await
            .expect("event arrives")
            .expect("stream open")
            .unwrap();
        if let Ok(data) = frame.into_data() {
            text.push_str(std::str::from_utf8(&data).unwrap());
        }
        while let Some(end) = text.find("\n\n") {
            let block: String = text.drain(..end + 2).collect();
            let (mut id, mut kind, mut data) = (None, String::new(), Value::Null);
            for line in block.lines() {
                if let Some(v) = line.strip_prefix("id: ") {
                    id = v.parse().ok();
                } else if let Some(v) = line.strip_prefix("event: ") {
                    kind = v.to_owned();
                } else if let Some(v) = line.strip_prefix("data: ") {
                    data = serde_json::from_str(v).unwrap();
                }
            }
            if let Some(id) = id {
                out.push((id, kind, data));
            }
        }
    }
    out
}

async fn open_stream(app: &Router, uri: &str, last_event_id: Option<&str>) -> Body {
    let mut req = Request::builder().uri(uri);
    if let Some(v) = last_event_id {
        req = req.header("last-event-id", v);
    }
    let resp = app
        .clone()
        .oneshot(req.body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "text/event-stream");
    resp.into_body()
}

#[tokio::test]
async fn event_stream_replays_then_follows() {
    let (app, _) = app();
    let id = session(&app, json!({ "maze": "t-maze" })).await;
    act(&app, &id, "move").await;
    learning(&app, &id, true).await;

    let mut body = open_stream(&app, &format!("/sessions/{id}/events"), None).await;
    let first = read_events(&mut body, 2).await;
    assert_eq!(first[0].0, 1);
    assert_eq!(first[0].1, "action");
    assert_eq!(first[0].2["data"]["action"], "move");
    assert_eq!(first[1].1, "learning");
    assert_eq!(first[1].2["data"]["learning"], true);

    act(&app, &id, "face_left").await;
    call(&app, "GET", &format!("/sessions/{id}/intelligence"), None).await;
    let live = read_events(&mut body, 2).await;
    assert_eq!((live[0].0, live[0].1.as_str()), (3, "action"));
    assert_eq!((live[1].0, live[1].1.as_str()), (4, "intelligence"));
    assert_eq!(live[1].2["schema_version"], 1);
}

#[tokio::test]
async fn event_stream_resumes_without_gaps() {
    let (app, _) = app();
    let id = session(&app, json!({ "maze": "t-maze" })).await;
    for a in ["move", "face_left", "move", "face_right", "move"] {
        act(&app, &id, a).await;
    }
    let mut body = open_stream(&app, &format!("/sessions/{id}/events?since=2"), None).await;
    let ids: Vec<u64> = read_events(&mut body, 3)
        .await
        .iter()
        .map(|e| e.0)
        .collect();
    assert_eq!(ids, [3, 4, 5]);

    let mut body = open_stream(&app, &format!("/sessions/{id}/events"), Some("4")).await;
    act(&app, &id, "move").await;
    let ids: Vec<u64> = read_events(&mut body, 2)
        .await
        .iter()
        .map(|e| e.0)
        .collect();
    assert_eq!(ids, [5, 6]);
}

#[tokio::test]
async fn idle_sessions_expire() {
    let state = app_state(builtins(), Duration::from_secs(60));
    let app = router(state.clone());
    let id = session(&app, json!({ "maze": "t-maze" })).await;
    assert_eq!(state.expire_idle(Instant::now()), 0);
    assert_eq!(state.len(), 1);
    assert_eq!(
        state.expire_idle(Instant::now() + Duration::from_secs(61)),
        1
    );
    let (status, _) = call(&app, "GET", &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn expired_session_ends_its_stream() {
    let state = app_state(builtins(), Duration::from_secs(60));
    let app = router(state.clone());
    let id = session(&app, json!({ "maze": "t-maze" })).await;
    let mut body = open_stream(&app, &format!("/sessions/{id}/events"), None).await;
    state.expire_idle(Instant::now() + Duration::from_secs(3600));
    let end = tokio::time::timeout(Duration::from_secs(5), body.frame())
        .await
        .expect("stream ends");
    assert!(end.is_none());
}
