//! HTTP API behaviour, driven in-process through the router.

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tbo_foc::foc::{FlightPlanCandidate, Provenance};
use tbo_foc::protocol::{LifecycleState, Payload};
use tbo_foc::scenario::{bundled_path, load_scenario};
use tbo_foc::sim::log::LogRecord;
use tbo_foc::sim::Simulation;
use tbo_service::api::{router, EventsPage, FlightView, RevisionAccepted};
use tbo_service::engine::{ClockState, SimHandle};
use tower::ServiceExt;

fn start(name: &str) -> (SimHandle, Router) {
    let sim = Simulation::new(load_scenario(bundled_path(name)).unwrap(), 1).unwrap();
    let handle = SimHandle::spawn(sim, 1.0, true);
    (handle.clone(), router(handle))
}

async fn send(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
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
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

async fn get<T: serde::de::DeserializeOwned>(app: &Router, uri: &str) -> T {
    let (status, v) = send(app, "GET", uri, None).await;
    assert_eq!(status, StatusCode::OK, "GET {uri}: {v}");
    serde_json::from_value(v).unwrap()
}

fn assert_error(v: &Value, code: &str) {
    assert_eq!(v["code"], code, "{v}");
    assert!(v["message"].as_str().is_some_and(|m| !m.is_empty()), "{v}");
}

#[tokio::test]
async fn lists_every_flight() {
    let (_, app) = start("fig5-corpus");
    let flights: Vec<FlightView> = get(&app, "/flights").await;
    assert_eq!(flights.len(), 29);
    let one: FlightView = get(&app, &format!("/flights/{}", flights[3].gufi)).await;
    assert_eq!(one.gufi, flights[3].gufi);
}

#[tokio::test]
async fn errors_have_codes() {
    let (_, app) = start("minimal");
    let (s, v) = send(&app, "GET", "/flights/NOPE-AAAA-BBBB-0-0000", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_error(&v, "NOT_FOUND");
    let (s, v) = send(&app, "GET", "/flights/not%20a%20gufi", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_error(&v, "NOT_FOUND");

    let flights: Vec<FlightView> = get(&app, "/flights").await;
    let uri = format!("/flights/{}/revisions", flights[0].gufi);
    let (s, v) = send(&app, "POST", &uri, Some(json!({"candidate": 3}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&v, "INVALID_REQUEST");
    let (s, v) = send(&app, "POST", &uri, Some(json!({"candidate_id": "NOPE"}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_error(&v, "NOT_FOUND");

    let regen = format!("/flights/{}/candidates/regenerate", flights[0].gufi);
    let (s, v) = send(&app, "POST", &regen, Some(json!({"objective": "FASTEST_POSSIBLE"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&v, "INVALID_REQUEST");
    let (s, v) = send(&app, "GET", "/events?since=minus-one", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&v, "INVALID_REQUEST");
}

#[tokio::test]
async fn clock_control() {
    let (_, app) = start("minimal");
    let c: ClockState = get(&app, "/clock").await;
    assert!(c.paused);
    let (s, v) = send(&app, "POST", "/clock", Some(json!({"action": "speed", "value": 600.0}))).await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["speed"], 600.0);
    let (s, v) = send(&app, "POST", "/clock", Some(json!({"action": "speed", "value": -1.0}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&v, "INVALID_REQUEST");
    let (s, v) = send(&app, "POST", "/clock", Some(json!({"action": "speed"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_error(&v, "INVALID_REQUEST");

    // Running at 600x, simulated time must move on its own.
    let (s, _) = send(&app, "POST", "/clock", Some(json!({"action": "resume"}))).await;
    assert_eq!(s, StatusCode::OK);
    tokio::time::sleep(std::time::Duration::from_millis(400)).await;
    let (s, v) = send(&app, "POST", "/clock", Some(json!({"action": "pause"}))).await;
    assert_eq!(s, StatusCode::OK);
    let paused: ClockState = serde_json::from_value(v).unwrap();
    assert!(paused.paused);
    assert!(paused.now_ms > c.now_ms, "{} -> {}", c.now_ms, paused.now_ms);
    tokio::time::sleep(std::time::Duration::from_millis(200)).await;
    let still: ClockState = get(&app, "/clock").await;
    assert_eq!(still.now_ms, paused.now_ms);
}

#[tokio::test]
async fn events_page_forward() {
    let (handle, app) = start("minimal");
    handle.call(|e| e.advance_to(i64::MAX)).await.unwrap();
    let all: EventsPage = get(&app, "/events").await;
    assert!(!all.events.is_empty());
    assert_eq!(all.next, all.events.len() as u64);
    let tail: EventsPage = get(&app, &format!("/events?since={}", all.next - 2)).await;
    assert_eq!(tail.events, all.events[all.events.len() - 2..]);
    let none: EventsPage = get(&app, &format!("/events?since={}", all.next)).await;
    assert!(none.events.is_empty());

    let c: ClockState = get(&app, "/clock").await;
    assert!(c.finished);
    let status: Value = get(&app, "/stats/status").await;
    assert_eq!(status[0]["status"], "CONCUR");
    assert_eq!(status[0]["count"], 1);
    let latency: Value = get(&app, "/stats/latency").await;
    assert!(latency.as_array().is_some_and(|rows| !rows.is_empty()));
}

#[tokio::test]
async fn operator_revision_round_trip() {
    let (handle, app) = start("disruption-3fir");
    // Mid-run: several flights airborne, the first closure in force.
    handle.call(|e| e.advance_to(23_400_000)).await.unwrap();
    let flights: Vec<FlightView> = get(&app, "/flights").await;
    let airborne: Vec<&FlightView> = flights.iter().filter(|f| f.state == LifecycleState::Active).collect();
    assert!(!airborne.is_empty(), "no flight airborne at 23400 s");
    for f in &airborne {
        assert!(f.position.is_some() && f.level.is_some());
        let _: Value = get(&app, &format!("/flights/{}/trajectory", f.gufi)).await;
    }

    let mut accepted = None;
    for f in &airborne {
        let (s, v) = send(
            &app,
            "POST",
            &format!("/flights/{}/candidates/regenerate", f.gufi),
            Some(json!({"objective": "MIN_FUEL"})),
        )
        .await;
        if s != StatusCode::OK {
            continue;
        }
        let cands: Vec<FlightPlanCandidate> = serde_json::from_value(v).unwrap();
        let Some(c) = cands.iter().find(|c| c.provenance == Provenance::Stage2Constrained) else {
            continue;
        };
        assert!(c.anchor >= 1, "in-flight candidates keep the flown prefix");
        let listed: Vec<FlightPlanCandidate> = get(&app, &format!("/flights/{}/candidates", f.gufi)).await;
        assert!(listed.iter().any(|x| x.id == c.id));

        let (s, v) = send(
            &app,
            "POST",
            &format!("/flights/{}/revisions", f.gufi),
            Some(json!({"candidate_id": c.id})),
        )
        .await;
        assert_eq!(s, StatusCode::ACCEPTED, "{v}");
        let body: RevisionAccepted = serde_json::from_value(v).unwrap();
        assert_eq!(body.candidate_id, c.id);

        // A second revision while the first is outstanding is refused.
        let (s, v) = send(
            &app,
            "POST",
            &format!("/flights/{}/revisions", f.gufi),
            Some(json!({"candidate_id": c.id})),
        )
        .await;
        assert_eq!(s, StatusCode::CONFLICT, "{v}");
        assert_error(&v, "CONFLICT");
        accepted = Some((f.gufi.clone(), c.id.clone()));
        break;
    }
    let (gufi, cid) = accepted.expect("some airborne flight accepts an operator revision");

    handle.call(|e| e.advance_to(23_460_000)).await.unwrap();
    let page: EventsPage = get(&app, "/events").await;
    let delivered = page.events.iter().any(|e| match &e.record {
        LogRecord::Message { message } => {
            message.gufi == gufi && matches!(&message.payload, Payload::RevisionRequest(b) if b.candidate_id == cid)
        }
        _ => false,
    });
    assert!(delivered, "the revision request reached the eASP");

    // Once the flight has landed the same command is a conflict.
    handle.call(|e| e.advance_to(i64::MAX)).await.unwrap();
    let f: FlightView = get(&app, &format!("/flights/{gufi}")).await;
    assert_eq!(f.state, LifecycleState::Completed);
    assert!(f.position.is_none());
    let (s, v) = send(
        &app,
        "POST",
        &format!("/flights/{gufi}/revisions"),
        Some(json!({"candidate_id": cid})),
    )
    .await;
    assert_eq!(s, StatusCode::CONFLICT, "{v}");
    assert_error(&v, "CONFLICT");
}
