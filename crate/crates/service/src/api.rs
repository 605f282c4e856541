//! HTTP/JSON API over the simulation thread. GET handlers only read
//! snapshots; the POST endpoints are the only mutations.

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tbo_foc::foc::{FlightPlanCandidate, Objective};
use tbo_foc::geo::GeoPoint;
use tbo_foc::perf::FlightLevel;
use tbo_foc::protocol::{Gufi, LifecycleState};
use tbo_foc::report::STATUS_ORDER;
use tbo_foc::sim::analysis::latency_stats;
use tbo_foc::sim::{secs, CommandError, EppDownlink, FlightState, LogRecord};
use tbo_foc::stats::{status_rows, LatencyRow, StatusRow};
use tbo_foc::trajectory::Trajectory4D;

use crate::engine::{ClockAction, ClockState, Engine, EngineGone, SimHandle};

/// Error body: `{code, message}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
            },
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NOT_FOUND", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "INVALID_REQUEST", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<EngineGone> for ApiError {
    fn from(e: EngineGone) -> Self {
        ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "ENGINE_UNAVAILABLE", e.to_string())
    }
}

impl From<CommandError> for ApiError {
    fn from(e: CommandError) -> Self {
        match e {
            CommandError::NotFound(m) => ApiError::not_found(m),
            CommandError::Conflict(m) => ApiError::new(StatusCode::CONFLICT, "CONFLICT", m),
            CommandError::Invalid(m) => ApiError::bad_request(m),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::bad_request(e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// A flight as listed by the API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightView {
    pub gufi: Gufi,
    pub operator: String,
    pub origin: String,
    pub destination: String,
    pub aircraft: String,
    pub departure_time: i64,
    pub state: LifecycleState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_status: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreed_candidate: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreed_fuel_kg: Option<f64>,
    pub replans: u32,
    pub revisions_sent: u32,
    pub revisions_accepted: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escalation: Option<String>,
    /// Where the aircraft is now, while airborne.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<GeoPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<FlightLevel>,
}

impl FlightView {
    fn of(f: &FlightState, now_ms: i64) -> Self {
        let airborne = matches!(f.state(), LifecycleState::Active | LifecycleState::RevisionPending);
        let flown = f.flown.as_ref().filter(|_| airborne);
        let t = secs(now_ms);
        FlightView {
            gufi: f.gufi.clone(),
            operator: f.spec.operator.clone(),
            origin: f.spec.origin.clone(),
            destination: f.spec.destination.clone(),
            aircraft: f.spec.aircraft.clone(),
            departure_time: f.spec.departure_time,
            state: f.state(),
            first_status: f.first_outcome.clone(),
            agreed_candidate: f.agreed_candidate.clone(),
            agreed_fuel_kg: f.lifecycle.agreed.as_ref().map(Trajectory4D::total_fuel),
            replans: f.replans,
            revisions_sent: f.revisions_sent,
            revisions_accepted: f.revisions_accepted,
            escalation: f.escalation.clone(),
            position: flown.map(|tr| tr.position_at(t)),
            level: flown.map(|tr| tr.points()[tr.segment_at(t) + 1].level),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionBody {
    pub candidate_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevisionAccepted {
    pub request_id: String,
    pub candidate_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenerateBody {
    pub objective: Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockBody {
    pub action: ClockAction,
    #[serde(default)]
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct EventsQuery {
    #[serde(default)]
    pub since: u64,
}

/// A log entry with its simulated time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventView {
    pub seq: u64,
    pub at_ms: i64,
    pub record: LogRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventsPage {
    pub events: Vec<EventView>,
    /// Pass as `since` on the next poll.
    pub next: u64,
}

pub fn router(handle: SimHandle) -> Router {
    Router::new()
        .route("/flights", get(list_flights))
        .route("/flights/{gufi}", get(get_flight))
        .route("/flights/{gufi}/trajectory", get(get_trajectory))
        .route("/flights/{gufi}/candidates", get(get_candidates))
        .route("/flights/{gufi}/candidates/regenerate", post(regenerate))
        .route("/flights/{gufi}/downlink", get(get_downlink))
        .route("/flights/{gufi}/revisions", post(post_revision))
        .route("/events", get(get_events))
        .route("/stats/latency", get(latency))
        .route("/stats/status", get(status))
        .route("/clock", get(get_clock).post(post_clock))
        .with_state(handle)
}

fn parse_gufi(raw: &str) -> ApiResult<Gufi> {
    Gufi::try_from(raw.to_string()).map_err(|_| ApiError::not_found(format!("flight {raw}")))
}

/// Run `f` against the flight, or 404.
async fn with_flight<R, F>(h: &SimHandle, raw: String, f: F) -> ApiResult<R>
where
    R: Send + 'static,
    F: FnOnce(&Engine, &FlightState) -> ApiResult<R> + Send + 'static,
{
    let gufi = parse_gufi(&raw)?;
    h.call(move |e| match e.sim.flight(&gufi) {
        Some(fs) => f(e, fs),
        None => Err(ApiError::not_found(format!("flight {gufi}"))),
    })
    .await?
}

async fn list_flights(State(h): State<SimHandle>) -> ApiResult<Json<Vec<FlightView>>> {
    let views = h
        .call(|e| e.sim.flights().iter().map(|f| FlightView::of(f, e.sim.now_ms())).collect())
        .await?;
    Ok(Json(views))
}

async fn get_flight(State(h): State<SimHandle>, Path(gufi): Path<String>) -> ApiResult<Json<FlightView>> {
    with_flight(&h, gufi, |e, f| Ok(Json(FlightView::of(f, e.sim.now_ms())))).await
}

async fn get_trajectory(State(h): State<SimHandle>, Path(gufi): Path<String>) -> ApiResult<Json<Trajectory4D>> {
    with_flight(&h, gufi, |_, f| {
        f.lifecycle
            .agreed
            .clone()
            .map(Json)
            .ok_or_else(|| ApiError::not_found(format!("flight {} has no agreed trajectory", f.gufi)))
    })
    .await
}

async fn get_candidates(
    State(h): State<SimHandle>,
    Path(gufi): Path<String>,
) -> ApiResult<Json<Vec<FlightPlanCandidate>>> {
    with_flight(&h, gufi, |_, f| Ok(Json(f.candidates.clone()))).await
}

async fn get_downlink(State(h): State<SimHandle>, Path(gufi): Path<String>) -> ApiResult<Json<EppDownlink>> {
    with_flight(&h, gufi, |_, f| {
        f.last_downlink
            .clone()
            .map(Json)
            .ok_or_else(|| ApiError::not_found(format!("no downlink received from {}", f.gufi)))
    })
    .await
}

async fn post_revision(
    State(h): State<SimHandle>,
    Path(raw): Path<String>,
    body: Result<Json<RevisionBody>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<RevisionAccepted>)> {
    let Json(body) = body?;
    let gufi = parse_gufi(&raw)?;
    let cid = body.candidate_id.clone();
    let request_id = h.call(move |e| e.sim.request_revision(&gufi, &cid)).await??;
    Ok((
        StatusCode::ACCEPTED,
        Json(RevisionAccepted {
            request_id,
            candidate_id: body.candidate_id,
        }),
    ))
}

async fn regenerate(
    State(h): State<SimHandle>,
    Path(raw): Path<String>,
    body: Result<Json<RegenerateBody>, JsonRejection>,
) -> ApiResult<Json<Vec<FlightPlanCandidate>>> {
    let Json(body) = body?;
    let gufi = parse_gufi(&raw)?;
    let cands = h.call(move |e| e.sim.regenerate(&gufi, body.objective)).await??;
    Ok(Json(cands))
}

async fn get_events(
    State(h): State<SimHandle>,
    q: Result<Query<EventsQuery>, QueryRejection>,
) -> ApiResult<Json<EventsPage>> {
    let Query(q) = q?;
    let page = h
        .call(move |e| {
            let log = e.sim.log();
            EventsPage {
                events: log
                    .since(q.since)
                    .iter()
                    .map(|x| EventView {
                        seq: x.seq,
                        at_ms: x.at_ms,
                        record: x.record.clone(),
                    })
                    .collect(),
                next: log.len() as u64,
            }
        })
        .await?;
    Ok(Json(page))
}

async fn latency(State(h): State<SimHandle>) -> ApiResult<Json<Vec<LatencyRow>>> {
    Ok(Json(h.call(|e| latency_stats(e.sim.log())).await?))
}

async fn status(State(h): State<SimHandle>) -> ApiResult<Json<Vec<StatusRow>>> {
    let rows = h
        .call(|e| {
            let labels: Vec<String> = e.sim.flights().iter().filter_map(|f| f.first_outcome.clone()).collect();
            status_rows(&labels, &STATUS_ORDER)
        })
        .await?;
    Ok(Json(rows))
}

async fn get_clock(State(h): State<SimHandle>) -> ApiResult<Json<ClockState>> {
    Ok(Json(h.call(|e| e.clock_state()).await?))
}

async fn post_clock(
    State(h): State<SimHandle>,
    body: Result<Json<ClockBody>, JsonRejection>,
) -> ApiResult<Json<ClockState>> {
    let Json(body) = body?;
    let state = h
        .call(move |e| {
            match body.action {
                ClockAction::Pause => e.clock.pause(),
                ClockAction::Resume => {
                    if let Some(f) = &e.fault {
                        return Err(ApiError::new(StatusCode::CONFLICT, "CONFLICT", format!("simulation failed: {f}")));
                    }
                    e.clock.resume()
                }
                ClockAction::Speed => {
                    let v = body.value.ok_or_else(|| ApiError::bad_request("speed needs a value"))?;
                    e.clock.set_speed(v).map_err(ApiError::bad_request)?;
                }
            }
            Ok(e.clock_state())
        })
        .await??;
    Ok(Json(state))
}
