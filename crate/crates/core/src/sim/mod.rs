//! Deterministic discrete-event simulation of the FOC, the eASPs and the
//! EFB exchanging FF-ICE messages over latency-modelled links.
//!
//! Every actor runs inside one event loop keyed by `(time ms, sequence)`,
//! so a scenario and a seed fully determine the event log.

pub mod analysis;
pub mod classify;
pub mod latency;
pub mod log;

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use thiserror::Error;

use crate::airspace::{ConstraintRule, Ruleset};
use crate::foc::{
    anchor_index, auto_renegotiate, filed_candidate, generate_candidates, handle_conversion_failure, handle_reply,
    CandidateIds, FlightPlanCandidate, FocPolicy, NegotiateHandling, Objective, PlanningInput, Provenance,
    Renegotiation, ReplyAction, RuleCatalogue,
};
use crate::protocol::{
    make_trial_request, AgreedBody, ConversionError, FficeMessage, FlightLifecycle, Gufi, GufiAllocator, GufiError,
    IllegalTransition, LifecycleEvent, LifecycleState, Payload, ProposalBody, ReplyBody, ReplyStatus, RevisionBody,
    TrajectoryBody, UpdateBody,
};
use crate::scenario::{closure_rule, DisruptionAction, FlightSpec, Scenario};
use crate::trajectory::{Trajectory4D, TrajectoryPoint4D, VcpKind};
use crate::validator::{ValidationOutcome, Validator};

pub use classify::{classify_change, ChangeClass};
pub use latency::LatencyModel;
pub use log::{EppDownlink, EventLog, FlightPhase, LogEntry, LogParseError, LogRecord};

/// Actor id of the airline operations centre.
pub const FOC: &str = "FOC";
/// Actor id of the electronic flight bag on board.
pub const EFB: &str = "EFB";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Gufi(#[from] GufiError),
    #[error("scenario deadlock: {} flight(s) never reached a terminal state: {}", .0.len(), join(.0))]
    ScenarioDeadlock(Vec<Gufi>),
    #[error("internal error: {0}")]
    Internal(String),
}

fn join(gs: &[Gufi]) -> String {
    gs.iter().map(Gufi::as_str).collect::<Vec<_>>().join(", ")
}

impl From<IllegalTransition> for SimError {
    fn from(e: IllegalTransition) -> Self {
        SimError::Internal(e.to_string())
    }
}

/// Rejections of operator commands.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CommandError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
enum Event {
    StartPlanning(usize),
    Deliver(Box<FficeMessage>),
    Downlink(Box<EppDownlink>),
    Notice { action: DisruptionAction, sent_at_ms: i64 },
    Depart(usize),
    Arrive { flight: usize, generation: u64 },
    EppDue(usize),
    Disruption(usize),
    ReactionTimer,
}

/// What one trial produced.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Reply(ReplyBody),
    /// The candidate never left the FOC.
    Conversion(ConversionError),
}

impl TrialOutcome {
    fn status(&self) -> Option<ReplyStatus> {
        match self {
            TrialOutcome::Reply(r) => Some(r.status()),
            TrialOutcome::Conversion(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Pending {
    request_id: String,
    candidate_id: String,
}

/// One flight as the FOC tracks it.
#[derive(Debug, Clone)]
pub struct FlightState {
    pub spec: FlightSpec,
    pub gufi: Gufi,
    pub policy: FocPolicy,
    pub lifecycle: FlightLifecycle,
    pub candidates: Vec<FlightPlanCandidate>,
    /// Replan / adopt iterations used before filing.
    pub replans: u32,
    /// Status of the very first trial ("n/a" if it could not be sent).
    pub first_outcome: Option<String>,
    /// Candidate whose trajectory is currently agreed.
    pub agreed_candidate: Option<String>,
    /// What the aircraft is actually flying (agreed, possibly delayed).
    pub flown: Option<Trajectory4D>,
    pub revisions_sent: u32,
    pub revisions_accepted: u32,
    pub last_downlink: Option<EppDownlink>,
    pub escalation: Option<String>,
    /// Rules this flight's replies taught the planner.
    pub learned: Vec<ConstraintRule>,
    ids: CandidateIds,
    trial_queue: VecDeque<String>,
    round: Vec<(String, TrialOutcome)>,
    refile: Option<String>,
    last_trialled: Option<String>,
    pending: Option<Pending>,
    depart_waiting: bool,
    arrive_due: bool,
    arrival_generation: u64,
}

impl FlightState {
    pub fn state(&self) -> LifecycleState {
        self.lifecycle.state
    }

    pub fn candidate(&self, id: &str) -> Option<&FlightPlanCandidate> {
        self.candidates.iter().find(|c| c.id == id)
    }

    fn candidate_mut(&mut self, id: &str) -> &mut FlightPlanCandidate {
        self.candidates.iter_mut().find(|c| c.id == id).expect("candidate ids come from this flight")
    }

    fn trajectory_of(&self, id: &str) -> Trajectory4D {
        self.candidate(id).expect("candidate ids come from this flight").trajectory.clone()
    }
}

/// An eASP: its current ruleset and the agreed trajectories it holds.
#[derive(Debug, Clone, PartialEq)]
pub struct EaspState {
    pub ruleset: Ruleset,
    pub agreed: BTreeMap<Gufi, Trajectory4D>,
}

pub fn ms(s: f64) -> i64 {
    (s * 1000.0).round() as i64
}

pub fn secs(ms: i64) -> f64 {
    ms as f64 / 1000.0
}

fn same_points(a: &[TrajectoryPoint4D], b: &[TrajectoryPoint4D]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.waypoint_id == y.waypoint_id
                && x.level == y.level
                && (x.eto - y.eto).abs() < 1e-6
                && (x.mass - y.mass).abs() < 1e-6
        })
}

pub struct Simulation {
    scenario: Arc<Scenario>,
    seed: u64,
    latency: LatencyModel,
    now_ms: i64,
    queue: BTreeMap<(i64, u64), Event>,
    event_seq: u64,
    msg_seq: u64,
    log: EventLog,
    flights: Vec<FlightState>,
    by_gufi: BTreeMap<Gufi, usize>,
    easps: BTreeMap<String, EaspState>,
    catalogue: RuleCatalogue,
    lifted: bool,
    reaction_armed: bool,
}

impl Simulation {
    pub fn new(scenario: Scenario, seed: u64) -> Result<Self, SimError> {
        let scenario = Arc::new(scenario);
        let mut alloc = GufiAllocator::default();
        let mut sim = Simulation {
            latency: LatencyModel::new(scenario.latency, seed),
            seed,
            now_ms: 0,
            queue: BTreeMap::new(),
            event_seq: 0,
            msg_seq: 0,
            log: EventLog::default(),
            flights: vec![],
            by_gufi: BTreeMap::new(),
            easps: scenario
                .easp_ids()
                .into_iter()
                .map(|id| {
                    let ruleset = scenario.initial_ruleset(&id);
                    (
                        id,
                        EaspState {
                            ruleset,
                            agreed: BTreeMap::new(),
                        },
                    )
                })
                .collect(),
            catalogue: scenario.foc_catalogue(),
            lifted: false,
            reaction_armed: false,
            scenario: scenario.clone(),
        };
        let lead = scenario.foc.planning_lead_s as i64;
        for (i, spec) in scenario.flights.iter().enumerate() {
            let gufi = alloc.allocate(&spec.operator, &spec.origin, &spec.destination, spec.departure_time)?;
            let start_ms = (spec.departure_time - lead) * 1000;
            sim.by_gufi.insert(gufi.clone(), i);
            sim.flights.push(FlightState {
                spec: spec.clone(),
                gufi,
                policy: scenario.policy_for(spec),
                lifecycle: FlightLifecycle::new(start_ms),
                candidates: vec![],
                replans: 0,
                first_outcome: None,
                agreed_candidate: None,
                flown: None,
                revisions_sent: 0,
                revisions_accepted: 0,
                last_downlink: None,
                escalation: None,
                learned: vec![],
                ids: CandidateIds::default(),
                trial_queue: VecDeque::new(),
                round: vec![],
                refile: None,
                last_trialled: None,
                pending: None,
                depart_waiting: false,
                arrive_due: false,
                arrival_generation: 0,
            });
            sim.schedule(start_ms, Event::StartPlanning(i));
            sim.schedule((spec.departure_time + spec.departure_delay_s) * 1000, Event::Depart(i));
        }
        for (j, d) in scenario.disruptions.iter().enumerate() {
            sim.schedule(d.at * 1000, Event::Disruption(j));
        }
        sim.now_ms = sim.next_event_ms().unwrap_or(0);
        Ok(sim)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn now_ms(&self) -> i64 {
        self.now_ms
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn flights(&self) -> &[FlightState] {
        &self.flights
    }

    pub fn flight(&self, gufi: &Gufi) -> Option<&FlightState> {
        self.by_gufi.get(gufi).map(|&i| &self.flights[i])
    }

    pub fn easps(&self) -> &BTreeMap<String, EaspState> {
        &self.easps
    }

    pub fn catalogue(&self) -> &RuleCatalogue {
        &self.catalogue
    }

    pub fn next_event_ms(&self) -> Option<i64> {
        self.queue.keys().next().map(|&(t, _)| t)
    }

    pub fn is_finished(&self) -> bool {
        self.queue.is_empty()
    }

    /// Process one event; `false` when the queue is empty.
    pub fn step(&mut self) -> Result<bool, SimError> {
        let Some(((at, _), event)) = self.queue.pop_first() else {
            return Ok(false);
        };
        self.now_ms = at;
        match event {
            Event::StartPlanning(fi) => self.start_planning(fi)?,
            Event::Deliver(msg) => self.deliver(*msg)?,
            Event::Downlink(d) => self.downlink_arrived(*d),
            Event::Notice { action, sent_at_ms } => self.notice(action, sent_at_ms),
            Event::Depart(fi) => self.depart(fi)?,
            Event::Arrive { flight, generation } => self.arrive(flight, generation)?,
            Event::EppDue(fi) => self.epp_due(fi),
            Event::Disruption(j) => self.disruption(j),
            Event::ReactionTimer => self.reaction_timer()?,
        }
        Ok(true)
    }

    /// Process every event due at or before `t_ms`, then set the clock to `t_ms`.
    pub fn run_until(&mut self, t_ms: i64) -> Result<(), SimError> {
        while self.next_event_ms().is_some_and(|t| t <= t_ms) {
            self.step()?;
        }
        self.now_ms = self.now_ms.max(t_ms);
        Ok(())
    }

    /// Run until no events remain; every flight must then be terminal.
    pub fn run_to_end(&mut self) -> Result<(), SimError> {
        while self.step()? {}
        let stuck: Vec<Gufi> = self
            .flights
            .iter()
            .filter(|f| !f.state().is_terminal())
            .map(|f| f.gufi.clone())
            .collect();
        if stuck.is_empty() {
            Ok(())
        } else {
            Err(SimError::ScenarioDeadlock(stuck))
        }
    }

    // ---------------------------------------------------------------- plumbing

    fn schedule(&mut self, at_ms: i64, event: Event) {
        self.event_seq += 1;
        self.queue.insert((at_ms, self.event_seq), event);
    }

    fn peek_msg_id(&self) -> String {
        format!("MSG-{:06}", self.msg_seq + 1)
    }

    fn take_msg_id(&mut self) -> String {
        self.msg_seq += 1;
        format!("MSG-{:06}", self.msg_seq)
    }

    /// Put `msg` on the wire at `msg.sent_at_ms` with the given one-way latency.
    fn dispatch(&mut self, mut msg: FficeMessage, latency_ms: i64) {
        msg.received_at_ms = msg.sent_at_ms + latency_ms;
        self.schedule(msg.received_at_ms, Event::Deliver(Box::new(msg)));
    }

    #[allow(clippy::too_many_arguments)]
    fn send(
        &mut self,
        gufi: &Gufi,
        sender: &str,
        receiver: &str,
        sent_at_ms: i64,
        latency_ms: i64,
        correlation_id: Option<String>,
        payload: Payload,
    ) -> String {
        let id = self.take_msg_id();
        self.dispatch(
            FficeMessage {
                id: id.clone(),
                gufi: gufi.clone(),
                sender: sender.into(),
                receiver: receiver.into(),
                sent_at_ms,
                received_at_ms: sent_at_ms,
                correlation_id,
                payload,
            },
            latency_ms,
        );
        id
    }

    fn push(&mut self, record: LogRecord) {
        self.log.push(self.now_ms, record);
    }

    fn transition(&mut self, fi: usize, event: LifecycleEvent) -> Result<(), SimError> {
        let name = event.name();
        let f = &mut self.flights[fi];
        let from = f.lifecycle.state;
        let to = f.lifecycle.apply(event, self.now_ms)?;
        let gufi = f.gufi.clone();
        self.push(LogRecord::Transition {
            gufi,
            from,
            to,
            event: name,
        });
        Ok(())
    }

    fn origin_easp(&self, fi: usize) -> String {
        let sc = &self.scenario;
        let pos = sc.airspace.position(&self.flights[fi].spec.origin).expect("origin checked at load");
        sc.airspace.controlling_easp(&pos).expect("origin jurisdiction checked at load").to_string()
    }

    /// eASP controlling the aircraft now; the origin eASP outside every FIR.
    fn current_easp(&self, fi: usize) -> String {
        let f = &self.flights[fi];
        match &f.flown {
            Some(t) => {
                let pos = t.position_at(secs(self.now_ms));
                match self.scenario.airspace.controlling_easp(&pos) {
                    Ok(id) => id.to_string(),
                    Err(_) => self.origin_easp(fi),
                }
            }
            None => self.origin_easp(fi),
        }
    }

    fn add_candidates(&mut self, fi: usize, cands: Vec<FlightPlanCandidate>) {
        for c in cands {
            let t = &c.trajectory;
            self.log.push(
                self.now_ms,
                LogRecord::Candidate {
                    gufi: c.gufi.clone(),
                    candidate_id: c.id.clone(),
                    objective: c.objective,
                    provenance: c.provenance,
                    fuel_kg: t.total_fuel(),
                    duration_s: t.duration_s(),
                    route: t.waypoint_ids().into_iter().map(String::from).collect(),
                    relaxation_trace: c.relaxation_trace.clone(),
                },
            );
            self.flights[fi].candidates.push(c);
        }
    }

    fn derived_candidate(
        &mut self,
        fi: usize,
        trajectory: Trajectory4D,
        objective: Objective,
        provenance: Provenance,
        anchor: usize,
    ) -> String {
        let f = &mut self.flights[fi];
        let id = f.ids.next(&f.gufi);
        let c = FlightPlanCandidate {
            id: id.clone(),
            gufi: f.gufi.clone(),
            trajectory,
            objective,
            provenance,
            last_status: None,
            relaxation_trace: vec![],
            anchor,
        };
        self.add_candidates(fi, vec![c]);
        id
    }

    fn validate(&self, easp: &str, fi: usize, traj: &Trajectory4D, scope: usize) -> ValidationOutcome {
        let sc = &self.scenario;
        let perf = sc.perf_for(&self.flights[fi].spec);
        Validator::new(&sc.airspace, perf, &self.easps[easp].ruleset).validate(traj, scope)
    }

    fn log_validation(&mut self, easp: &str, fi: usize, request_id: Option<String>, outcome: &ValidationOutcome) {
        let failed = outcome.failed().into_iter().map(String::from).collect();
        let gufi = self.flights[fi].gufi.clone();
        self.push(LogRecord::Validation {
            easp: easp.into(),
            gufi,
            request_id,
            status: outcome.status,
            ruleset_version: outcome.ruleset_version,
            failed,
        });
    }

    // ------------------------------------------------------------ pre-departure

    fn start_planning(&mut self, fi: usize) -> Result<(), SimError> {
        if self.flights[fi].state().is_terminal() {
            return Ok(());
        }
        let initial = match self.flights[fi].spec.filed_plan.clone() {
            Some(plan) => {
                let sc = self.scenario.clone();
                let f = &mut self.flights[fi];
                let id = f.ids.next(&f.gufi);
                filed_candidate(&sc.airspace, sc.perf_for(&f.spec), &f.spec, &plan, &f.gufi, id)
                    .map(|c| {
                        let id = c.id.clone();
                        self.add_candidates(fi, vec![c]);
                        vec![id]
                    })
                    .map_err(|e| format!("filed plan cannot be built: {e}"))
            }
            None => self.generate_departure(fi),
        };
        match initial {
            Ok(ids) => {
                self.flights[fi].trial_queue = ids.into();
                self.trial_next(fi)
            }
            Err(reason) => self.escalate(fi, reason),
        }
    }

    /// Fresh departure candidates; returns the submittable ids in order.
    fn generate_departure(&mut self, fi: usize) -> Result<Vec<String>, String> {
        let sc = self.scenario.clone();
        let f = &self.flights[fi];
        let input = PlanningInput::departure(
            &sc.airspace,
            sc.perf_for(&f.spec),
            &f.spec,
            &f.gufi,
            sc.foc.stage1_levels.as_deref(),
            &self.catalogue,
            &f.learned,
        );
        let mut ids = f.ids.clone();
        let cands = generate_candidates(&input, &f.spec.objectives, &mut ids).map_err(|e| e.to_string())?;
        self.flights[fi].ids = ids;
        let submit = cands.iter().filter(|c| c.is_submittable()).map(|c| c.id.clone()).collect();
        self.add_candidates(fi, cands);
        Ok(submit)
    }

    /// Trial the next queued candidate; decide once the queue is empty.
    fn trial_next(&mut self, fi: usize) -> Result<(), SimError> {
        loop {
            let Some(cid) = self.flights[fi].trial_queue.pop_front() else {
                return self.decide(fi);
            };
            let receiver = self.origin_easp(fi);
            let id = self.peek_msg_id();
            let cand = self.flights[fi].candidate(&cid).expect("queued ids exist").clone();
            match make_trial_request(&cand, &self.scenario.airspace, id, FOC, &receiver, self.now_ms) {
                Err(e) => {
                    self.push(LogRecord::ConversionFailed {
                        gufi: cand.gufi.clone(),
                        candidate_id: cid.clone(),
                        rule_id: e.rule_id.clone(),
                        message: e.message.clone(),
                    });
                    let f = &mut self.flights[fi];
                    f.first_outcome.get_or_insert_with(|| "n/a".into());
                    f.round.push((cid, TrialOutcome::Conversion(e)));
                }
                Ok(msg) => {
                    self.take_msg_id();
                    self.transition(fi, LifecycleEvent::TrialSent)?;
                    let f = &mut self.flights[fi];
                    f.pending = Some(Pending {
                        request_id: msg.id.clone(),
                        candidate_id: cid.clone(),
                    });
                    f.last_trialled = Some(cid);
                    let lat = self.latency.ground();
                    self.dispatch(msg, lat);
                    return Ok(());
                }
            }
        }
    }

    /// Apply the reply policy to the best outcome of the finished round.
    fn decide(&mut self, fi: usize) -> Result<(), SimError> {
        let round = std::mem::take(&mut self.flights[fi].round);
        let pick = round
            .iter()
            .position(|(_, o)| o.status() == Some(ReplyStatus::Concur))
            .or_else(|| round.iter().position(|(_, o)| o.status() == Some(ReplyStatus::Negotiate)));
        let Some((cid, outcome)) = pick.or((!round.is_empty()).then_some(0)).map(|i| round[i].clone()) else {
            return self.escalate(fi, "no candidate could be trialled".into());
        };
        let f = &mut self.flights[fi];
        let (policy, replans) = (f.policy, f.replans);
        let action = match &outcome {
            TrialOutcome::Reply(r) => handle_reply(f.candidate_mut(&cid), r, &policy, replans),
            TrialOutcome::Conversion(e) => handle_conversion_failure(e, &policy, replans),
        };
        let gufi = f.gufi.clone();
        let name = match &action {
            Ok(ReplyAction::File) => "FILE",
            Ok(ReplyAction::AdoptProposal(_)) => "ADOPT_PROPOSAL",
            Ok(ReplyAction::Replan(_)) => "REPLAN",
            Ok(ReplyAction::Escalate(_)) | Err(_) => "ESCALATE",
        };
        self.push(LogRecord::Decision {
            gufi,
            candidate_id: cid.clone(),
            action: name.into(),
        });
        match action {
            Err(e) => self.escalate(fi, e.to_string()),
            Ok(ReplyAction::Escalate(reason)) => self.escalate(fi, reason),
            Ok(ReplyAction::File) => {
                let f = &mut self.flights[fi];
                if f.last_trialled.as_deref() == Some(cid.as_str()) && f.state() == LifecycleState::ReadyToFile {
                    self.file(fi, &cid)
                } else {
                    // An earlier candidate of the round won: confirm it first.
                    f.refile = Some(cid.clone());
                    f.trial_queue = VecDeque::from([cid]);
                    self.trial_next(fi)
                }
            }
            Ok(ReplyAction::AdoptProposal(traj)) => {
                let objective = self.flights[fi].candidate(&cid).expect("picked from round").objective;
                self.flights[fi].replans += 1;
                let id = self.derived_candidate(fi, traj, objective, Provenance::EaspProposal, 0);
                self.flights[fi].trial_queue = VecDeque::from([id]);
                self.trial_next(fi)
            }
            Ok(ReplyAction::Replan(rule_ids)) => {
                self.flights[fi].replans += 1;
                for id in rule_ids {
                    if let Some(rule) = self.catalogue.resolve(&id) {
                        let learned = &mut self.flights[fi].learned;
                        if !learned.iter().any(|r| r.id == rule.id) {
                            learned.push(rule);
                        }
                    }
                }
                match self.generate_departure(fi) {
                    Ok(ids) => {
                        self.flights[fi].trial_queue = ids.into();
                        self.trial_next(fi)
                    }
                    Err(reason) => self.escalate(fi, reason),
                }
            }
        }
    }

    fn file(&mut self, fi: usize, cid: &str) -> Result<(), SimError> {
        self.transition(fi, LifecycleEvent::File)?;
        let receiver = self.origin_easp(fi);
        let f = &self.flights[fi];
        let (gufi, trajectory) = (f.gufi.clone(), f.trajectory_of(cid));
        let lat = self.latency.ground();
        let id = self.send(
            &gufi,
            FOC,
            &receiver,
            self.now_ms,
            lat,
            None,
            Payload::FilingRequest(TrajectoryBody {
                candidate_id: cid.into(),
                trajectory,
            }),
        );
        self.flights[fi].pending = Some(Pending {
            request_id: id,
            candidate_id: cid.into(),
        });
        Ok(())
    }

    fn escalate(&mut self, fi: usize, reason: String) -> Result<(), SimError> {
        let gufi = self.flights[fi].gufi.clone();
        self.push(LogRecord::Escalation {
            gufi,
            reason: reason.clone(),
        });
        let f = &mut self.flights[fi];
        f.escalation = Some(reason);
        f.pending = None;
        f.trial_queue.clear();
        f.refile = None;
        self.transition(fi, LifecycleEvent::Cancel)
    }

    // ---------------------------------------------------------------- delivery

    fn deliver(&mut self, msg: FficeMessage) -> Result<(), SimError> {
        self.push(LogRecord::Message { message: msg.clone() });
        match msg.receiver.as_str() {
            FOC => self.foc_receive(msg),
            EFB => Ok(()),
            _ => self.easp_receive(msg),
        }
    }

    /// The outstanding request this reply answers, if it answers one.
    fn take_pending(&mut self, fi: usize, msg: &FficeMessage) -> Option<String> {
        let f = &mut self.flights[fi];
        match &f.pending {
            Some(p) if msg.correlation_id.as_deref() == Some(p.request_id.as_str()) => {
                f.pending.take().map(|p| p.candidate_id)
            }
            _ => None,
        }
    }

    fn foc_receive(&mut self, msg: FficeMessage) -> Result<(), SimError> {
        let Some(&fi) = self.by_gufi.get(&msg.gufi) else {
            return Ok(());
        };
        if self.flights[fi].state().is_terminal() {
            return Ok(());
        }
        match &msg.payload {
            Payload::TrialReply(r) => {
                let Some(cid) = self.take_pending(fi, &msg) else { return Ok(()) };
                self.transition(fi, LifecycleEvent::Reply(r.status()))?;
                let f = &mut self.flights[fi];
                f.first_outcome.get_or_insert_with(|| r.status().name().into());
                f.candidate_mut(&cid).last_status = Some(r.status());
                if f.refile.as_deref() == Some(cid.as_str()) {
                    f.refile = None;
                    if r.status().accepts() {
                        return self.file(fi, &cid);
                    }
                }
                f.round.push((cid, TrialOutcome::Reply(r.clone())));
                if f.trial_queue.is_empty() {
                    self.decide(fi)
                } else {
                    self.trial_next(fi)
                }
            }
            Payload::FilingStatus(r) => {
                let Some(cid) = self.take_pending(fi, &msg) else { return Ok(()) };
                if r.status().accepts() {
                    let traj = self.flights[fi].trajectory_of(&cid);
                    self.transition(fi, LifecycleEvent::FilingAccepted(traj.clone()))?;
                    let f = &mut self.flights[fi];
                    f.flown = Some(traj);
                    f.agreed_candidate = Some(cid);
                    if f.depart_waiting {
                        self.do_depart(fi)?;
                    }
                    Ok(())
                } else {
                    self.transition(fi, LifecycleEvent::Reply(r.status()))?;
                    self.flights[fi].round = vec![(cid, TrialOutcome::Reply(r.clone()))];
                    self.decide(fi)
                }
            }
            Payload::RevisionReply(r) => {
                let Some(cid) = self.take_pending(fi, &msg) else { return Ok(()) };
                let traj = self.flights[fi].trajectory_of(&cid);
                self.transition(
                    fi,
                    LifecycleEvent::RevisionReply {
                        status: r.status(),
                        trajectory: traj.clone(),
                    },
                )?;
                let f = &mut self.flights[fi];
                f.candidate_mut(&cid).last_status = Some(r.status());
                if r.status().accepts() {
                    f.flown = Some(traj);
                    f.agreed_candidate = Some(cid);
                    f.revisions_accepted += 1;
                    self.schedule_arrival(fi);
                } else if f.arrive_due {
                    self.schedule_arrival(fi);
                }
                Ok(())
            }
            Payload::ProposalRequest(p) => self.on_proposal(fi, p.clone()),
            _ => Ok(()),
        }
    }

    fn easp_receive(&mut self, msg: FficeMessage) -> Result<(), SimError> {
        let easp = msg.receiver.clone();
        let (Some(&fi), true) = (self.by_gufi.get(&msg.gufi), self.easps.contains_key(&easp)) else {
            return Ok(());
        };
        let (trajectory, scope) = match &msg.payload {
            Payload::TrialRequest(b) | Payload::FilingRequest(b) => (b.trajectory.clone(), 0),
            Payload::RevisionRequest(b) => (b.trajectory.clone(), b.anchor_index),
            Payload::TrajectoryUpdate(UpdateBody { trajectory, .. })
            | Payload::AgreedTrajectory(AgreedBody { trajectory, .. }) => {
                let t = trajectory.clone();
                self.easps.get_mut(&easp).expect("checked").agreed.insert(msg.gufi.clone(), t);
                return Ok(());
            }
            _ => return Ok(()),
        };
        let outcome = self.validate(&easp, fi, &trajectory, scope);
        self.log_validation(&easp, fi, Some(msg.id.clone()), &outcome);
        let reply = outcome.reply();
        let accepted = reply.status().accepts();
        let payload = match msg.kind() {
            crate::protocol::MessageKind::TrialRequest => Payload::TrialReply(reply),
            crate::protocol::MessageKind::FilingRequest => Payload::FilingStatus(reply),
            _ => Payload::RevisionReply(reply),
        };
        let is_trial = matches!(payload, Payload::TrialReply(_));
        let sent = self.now_ms + self.latency.processing();
        let lat = self.latency.ground();
        self.send(&msg.gufi, &easp, &msg.sender, sent, lat, Some(msg.id.clone()), payload);
        if accepted && !is_trial {
            self.easps.get_mut(&easp).expect("checked").agreed.insert(msg.gufi.clone(), trajectory.clone());
            self.distribute_agreed(&easp, &msg.gufi, trajectory, &msg.id, sent);
        }
        Ok(())
    }

    /// AGREED_TRAJECTORY from the accepting eASP to the FOC, the EFB and
    /// every eASP the rest of the flight will enter.
    fn distribute_agreed(&mut self, easp: &str, gufi: &Gufi, traj: Trajectory4D, request_id: &str, at_ms: i64) {
        let mut recipients = vec![FOC.to_string(), EFB.to_string()];
        recipients.extend(self.scenario.airspace.downstream_easps(&traj, secs(at_ms)));
        for r in recipients {
            let lat = if r == EFB { self.latency.efb() } else { self.latency.ground() };
            self.send(
                gufi,
                easp,
                &r,
                at_ms,
                lat,
                Some(request_id.into()),
                Payload::AgreedTrajectory(AgreedBody {
                    trajectory: traj.clone(),
                    agreed_by: easp.into(),
                }),
            );
        }
    }

    // ------------------------------------------------------------------ flight

    fn depart(&mut self, fi: usize) -> Result<(), SimError> {
        match self.flights[fi].state() {
            LifecycleState::Agreed => self.do_depart(fi),
            s if s.is_terminal() => Ok(()),
            _ => {
                self.flights[fi].depart_waiting = true;
                Ok(())
            }
        }
    }

    fn do_depart(&mut self, fi: usize) -> Result<(), SimError> {
        self.flights[fi].depart_waiting = false;
        let agreed = self.flights[fi].lifecycle.agreed.clone().expect("AGREED has a trajectory");
        let delay_s = secs(self.now_ms) - agreed.first().eto;
        if delay_s.abs() < 1e-9 {
            self.transition(fi, LifecycleEvent::Depart)?;
            self.flights[fi].flown = Some(agreed);
        } else {
            let shifted = agreed.time_shifted(delay_s);
            let threshold = self.scenario.foc.small_change_threshold_s as f64;
            match classify_change(&agreed, &shifted, threshold) {
                ChangeClass::Small => {
                    self.transition(fi, LifecycleEvent::UpdateReceived(shifted.clone()))?;
                    self.transition(fi, LifecycleEvent::Depart)?;
                    self.flights[fi].flown = Some(shifted.clone());
                    let mut to = vec![self.origin_easp(fi)];
                    to.extend(self.scenario.airspace.downstream_easps(&shifted, secs(self.now_ms)));
                    let gufi = self.flights[fi].gufi.clone();
                    for r in to {
                        let lat = self.latency.ground();
                        self.send(
                            &gufi,
                            FOC,
                            &r,
                            self.now_ms,
                            lat,
                            None,
                            Payload::TrajectoryUpdate(UpdateBody {
                                trajectory: shifted.clone(),
                                delay_s,
                            }),
                        );
                    }
                }
                ChangeClass::ClearanceRequired => {
                    self.transition(fi, LifecycleEvent::Depart)?;
                    self.flights[fi].flown = Some(shifted.clone());
                    let f = &self.flights[fi];
                    let base = f
                        .agreed_candidate
                        .as_deref()
                        .and_then(|id| f.candidate(id))
                        .map(|c| (c.objective, c.provenance))
                        .unwrap_or((f.spec.objectives[0], Provenance::Stage2Constrained));
                    let cid = self.derived_candidate(fi, shifted, base.0, base.1, 0);
                    self.send_revision(fi, &cid, 0, "DEPARTURE_DELAY")?;
                }
            }
        }
        self.schedule_arrival(fi);
        self.schedule(self.now_ms, Event::EppDue(fi));
        Ok(())
    }

    fn schedule_arrival(&mut self, fi: usize) {
        let f = &mut self.flights[fi];
        f.arrive_due = false;
        f.arrival_generation += 1;
        let last = f.flown.as_ref().expect("airborne flights have a trajectory").last().eto;
        let at = ((last * 1000.0).ceil() as i64).max(self.now_ms);
        let generation = f.arrival_generation;
        self.schedule(at, Event::Arrive { flight: fi, generation });
    }

    fn arrive(&mut self, fi: usize, generation: u64) -> Result<(), SimError> {
        let f = &mut self.flights[fi];
        if generation != f.arrival_generation {
            return Ok(());
        }
        match f.state() {
            LifecycleState::Active => self.transition(fi, LifecycleEvent::Arrive),
            LifecycleState::RevisionPending => {
                f.arrive_due = true;
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn send_revision(&mut self, fi: usize, cid: &str, anchor: usize, reason: &str) -> Result<(), SimError> {
        let receiver = self.current_easp(fi);
        self.transition(fi, LifecycleEvent::RevisionSent)?;
        let f = &self.flights[fi];
        let (gufi, trajectory) = (f.gufi.clone(), f.trajectory_of(cid));
        let lat = self.latency.ground();
        let id = self.send(
            &gufi,
            FOC,
            &receiver,
            self.now_ms,
            lat,
            None,
            Payload::RevisionRequest(RevisionBody {
                candidate_id: cid.into(),
                trajectory,
                anchor_index: anchor,
                reason: reason.into(),
            }),
        );
        let f = &mut self.flights[fi];
        f.revisions_sent += 1;
        f.pending = Some(Pending {
            request_id: id,
            candidate_id: cid.into(),
        });
        Ok(())
    }

    fn epp_due(&mut self, fi: usize) {
        if !matches!(self.flights[fi].state(), LifecycleState::Active | LifecycleState::RevisionPending) {
            return;
        }
        let period = self.scenario.foc.epp_period_s as i64 * 1000;
        self.schedule(self.now_ms + period, Event::EppDue(fi));
        let f = &self.flights[fi];
        let t = secs(self.now_ms);
        let traj = f.flown.as_ref().expect("airborne flights have a trajectory");
        let in_gap = f.spec.connectivity_gaps.iter().any(|g| g[0] as f64 <= t && t <= g[1] as f64);
        if in_gap || t > traj.last().eto {
            return;
        }
        let toc = traj.vcp_index(VcpKind::Toc).map(|i| traj.points()[i].eto);
        let tod = traj.vcp_index(VcpKind::Tod).map(|i| traj.points()[i].eto);
        let phase = if toc.is_some_and(|c| t < c) {
            FlightPhase::Climb
        } else if tod.is_some_and(|d| t >= d) {
            FlightPhase::Descent
        } else {
            FlightPhase::Cruise
        };
        let seg = traj.segment_at(t);
        let mut d = EppDownlink {
            gufi: f.gufi.clone(),
            sent_at_ms: self.now_ms,
            received_at_ms: self.now_ms,
            phase,
            position: traj.position_at(t),
            level: traj.points()[seg + 1].level,
            mass_kg: traj.mass_at(t),
            predicted_eta_s: traj.last().eto,
            predicted_landing_mass_kg: traj.last().mass,
            toc_eto_s: toc,
            tod_eto_s: tod,
        };
        d.received_at_ms += self.latency.efb();
        self.schedule(d.received_at_ms, Event::Downlink(Box::new(d)));
    }

    fn downlink_arrived(&mut self, d: EppDownlink) {
        if let Some(&fi) = self.by_gufi.get(&d.gufi) {
            self.flights[fi].last_downlink = Some(d.clone());
        }
        self.push(LogRecord::Downlink { downlink: d });
    }

    // ------------------------------------------------------------- disruptions

    fn disruption(&mut self, j: usize) {
        let action = self.scenario.disruptions[j].action.clone();
        for es in self.easps.values_mut() {
            let next = match &action {
                DisruptionAction::Activate { rule_id } => es.ruleset.with_enabled(rule_id, true),
                DisruptionAction::Deactivate { rule_id } => es.ruleset.with_enabled(rule_id, false),
                DisruptionAction::CloseSegment { rule_id, from, to } => {
                    Some(es.ruleset.with_rule(closure_rule(rule_id, from, to)))
                }
            };
            if let Some(r) = next {
                es.ruleset = r;
            }
        }
        let rulesets = self.easps.iter().map(|(id, e)| (id.clone(), e.ruleset.version)).collect();
        self.push(LogRecord::Disruption {
            action: action.clone(),
            rulesets,
        });
        let lat = self.latency.ground();
        self.schedule(
            self.now_ms + lat,
            Event::Notice {
                action: action.clone(),
                sent_at_ms: self.now_ms,
            },
        );
        if let DisruptionAction::Activate { rule_id } = &action {
            self.easp_proposals(rule_id);
        }
    }

    /// After a discretionary rule switches on, the eASP controlling each
    /// airborne flight checks the rest of its agreed trajectory and proposes
    /// a modification when it can build one for that rule.
    fn easp_proposals(&mut self, rule_id: &str) {
        let now_s = secs(self.now_ms);
        let lead = self.scenario.foc.anchor_lead_s as f64;
        for fi in 0..self.flights.len() {
            let f = &self.flights[fi];
            if f.state() != LifecycleState::Active {
                continue;
            }
            let easp = self.current_easp(fi);
            let es = &self.easps[&easp];
            if !es.ruleset.get(rule_id).is_some_and(|r| !r.is_hard()) {
                continue;
            }
            let Some(agreed) = es.agreed.get(&f.gufi).cloned() else { continue };
            let Some(scope) = anchor_index(&agreed, now_s, lead) else { continue };
            let outcome = self.validate(&easp, fi, &agreed, scope);
            self.log_validation(&easp, fi, None, &outcome);
            if outcome.status != ReplyStatus::Negotiate || outcome.proposal_rule.as_deref() != Some(rule_id) {
                continue;
            }
            let message = outcome
                .errors
                .iter()
                .find(|e| e.rule_id == rule_id)
                .map(|e| e.message.clone())
                .unwrap_or_default();
            let gufi = self.flights[fi].gufi.clone();
            let sent = self.now_ms + self.latency.processing();
            let lat = self.latency.ground();
            self.send(
                &gufi,
                &easp,
                FOC,
                sent,
                lat,
                None,
                Payload::ProposalRequest(ProposalBody {
                    trajectory: outcome.proposal.expect("NEGOTIATE with a proposal rule has a proposal"),
                    rule_id: rule_id.into(),
                    message,
                }),
            );
        }
    }

    fn notice(&mut self, action: DisruptionAction, sent_at_ms: i64) {
        let (rule_id, name) = match &action {
            DisruptionAction::Activate { rule_id } => {
                self.catalogue.set_enabled(rule_id, true);
                (rule_id, "ACTIVATE")
            }
            DisruptionAction::Deactivate { rule_id } => {
                self.catalogue.set_enabled(rule_id, false);
                self.lifted = true;
                (rule_id, "DEACTIVATE")
            }
            DisruptionAction::CloseSegment { rule_id, from, to } => {
                self.catalogue.install(closure_rule(rule_id, from, to));
                (rule_id, "CLOSE_SEGMENT")
            }
        };
        self.push(LogRecord::Notice {
            rule_id: rule_id.clone(),
            action: name.into(),
            sent_at_ms,
            received_at_ms: self.now_ms,
        });
        if !self.reaction_armed {
            self.reaction_armed = true;
            let delay = self.scenario.foc.policy.reaction_timer_s as i64 * 1000;
            self.schedule(self.now_ms + delay, Event::ReactionTimer);
        }
    }

    fn reaction_timer(&mut self) -> Result<(), SimError> {
        self.reaction_armed = false;
        let lifted = std::mem::take(&mut self.lifted);
        for fi in 0..self.flights.len() {
            if self.flights[fi].state() == LifecycleState::Active {
                self.renegotiate(fi, lifted)?;
            }
        }
        Ok(())
    }

    fn renegotiate(&mut self, fi: usize, lifted: bool) -> Result<(), SimError> {
        let sc = self.scenario.clone();
        let f = &self.flights[fi];
        let gufi = f.gufi.clone();
        let flown = f.flown.clone().expect("airborne flights have a trajectory");
        let Some(anchor) = anchor_index(&flown, secs(self.now_ms), sc.foc.anchor_lead_s as f64) else {
            self.push(LogRecord::Renegotiation {
                gufi,
                outcome: "NO_ANCHOR".into(),
                candidate_id: None,
                remaining_kg: None,
                new_remaining_kg: None,
            });
            return Ok(());
        };
        let input = PlanningInput::in_flight(
            &sc.airspace,
            sc.perf_for(&f.spec),
            &f.spec,
            &gufi,
            &flown,
            anchor,
            sc.foc.stage1_levels.as_deref(),
            &self.catalogue,
            &f.learned,
        );
        let mut ids = f.ids.clone();
        let result = auto_renegotiate(&input, &flown, f.spec.objectives[0], lifted, sc.foc.min_saving_kg, &mut ids);
        self.flights[fi].ids = ids;
        match result {
            Renegotiation::NotAffected => self.push(LogRecord::Renegotiation {
                gufi,
                outcome: "NOT_AFFECTED".into(),
                candidate_id: None,
                remaining_kg: None,
                new_remaining_kg: None,
            }),
            Renegotiation::NoImprovement { remaining_kg, best_kg } => self.push(LogRecord::Renegotiation {
                gufi,
                outcome: "NO_IMPROVEMENT".into(),
                candidate_id: None,
                remaining_kg: Some(remaining_kg),
                new_remaining_kg: best_kg,
            }),
            Renegotiation::Revise {
                candidate,
                reason,
                remaining_kg,
                new_remaining_kg,
            } => {
                let reason = match reason {
                    crate::foc::RevisionReason::RestoreFeasibility => "RESTORE_FEASIBILITY",
                    crate::foc::RevisionReason::FuelSaving => "FUEL_SAVING",
                };
                let cid = candidate.id.clone();
                self.push(LogRecord::Renegotiation {
                    gufi,
                    outcome: reason.into(),
                    candidate_id: Some(cid.clone()),
                    remaining_kg: Some(remaining_kg),
                    new_remaining_kg: Some(new_remaining_kg),
                });
                self.add_candidates(fi, vec![candidate]);
                self.send_revision(fi, &cid, anchor, reason)?;
            }
        }
        Ok(())
    }

    fn on_proposal(&mut self, fi: usize, p: ProposalBody) -> Result<(), SimError> {
        let gufi = self.flights[fi].gufi.clone();
        let decline = |sim: &mut Self, reason: &str| {
            sim.push(LogRecord::ProposalDeclined {
                gufi: gufi.clone(),
                rule_id: p.rule_id.clone(),
                reason: reason.into(),
            });
            Ok(())
        };
        let f = &self.flights[fi];
        if f.state() != LifecycleState::Active {
            return decline(self, "flight is not in a state to revise");
        }
        if f.policy.negotiate_handling == NegotiateHandling::FileAsIs {
            return decline(self, "policy keeps the agreed trajectory");
        }
        let flown = f.flown.as_ref().expect("airborne flights have a trajectory");
        let lead = self.scenario.foc.anchor_lead_s as f64;
        let Some(anchor) = anchor_index(flown, secs(self.now_ms), lead) else {
            return decline(self, "too close to arrival");
        };
        let pts = p.trajectory.points();
        if pts.len() <= anchor || !same_points(&pts[..=anchor], &flown.points()[..=anchor]) {
            return decline(self, "proposal changes points already committed");
        }
        let objective = f
            .agreed_candidate
            .as_deref()
            .and_then(|id| f.candidate(id))
            .map_or(f.spec.objectives[0], |c| c.objective);
        let cid = self.derived_candidate(fi, p.trajectory, objective, Provenance::EaspProposal, anchor);
        self.send_revision(fi, &cid, anchor, "EASP_PROPOSAL")
    }

    // ---------------------------------------------------------------- commands

    fn index_of(&self, gufi: &Gufi) -> Result<usize, CommandError> {
        self.by_gufi.get(gufi).copied().ok_or_else(|| CommandError::NotFound(format!("flight {gufi}")))
    }

    /// Operator-requested revision with an existing in-flight candidate.
    /// Returns the REVISION_REQUEST message id.
    pub fn request_revision(&mut self, gufi: &Gufi, candidate_id: &str) -> Result<String, CommandError> {
        let fi = self.index_of(gufi)?;
        let f = &self.flights[fi];
        let cand = f
            .candidate(candidate_id)
            .ok_or_else(|| CommandError::NotFound(format!("candidate {candidate_id}")))?;
        if f.state() != LifecycleState::Active {
            return Err(CommandError::Conflict(format!("flight is {}", f.state().name())));
        }
        if cand.anchor == 0 {
            return Err(CommandError::Invalid(format!(
                "candidate {candidate_id} is a pre-departure plan; regenerate in flight first"
            )));
        }
        let flown = f.flown.as_ref().expect("airborne flights have a trajectory");
        let now_anchor = anchor_index(flown, secs(self.now_ms), self.scenario.foc.anchor_lead_s as f64);
        let anchor = cand.anchor;
        let pts = cand.trajectory.points();
        let fits = now_anchor.is_some_and(|a| anchor >= a)
            && anchor < flown.points().len()
            && same_points(&pts[..=anchor], &flown.points()[..=anchor]);
        if !fits {
            return Err(CommandError::Conflict(format!(
                "candidate {candidate_id} starts at a point the flight has passed or no longer shares"
            )));
        }
        let cid = candidate_id.to_string();
        self.send_revision(fi, &cid, anchor, "OPERATOR")
            .map_err(|e| CommandError::Conflict(e.to_string()))?;
        Ok(self.flights[fi].pending.as_ref().expect("just sent").request_id.clone())
    }

    /// Generate fresh candidates for `objective` (from the current anchor
    /// when airborne) without submitting them.
    pub fn regenerate(&mut self, gufi: &Gufi, objective: Objective) -> Result<Vec<FlightPlanCandidate>, CommandError> {
        let fi = self.index_of(gufi)?;
        let sc = self.scenario.clone();
        let f = &self.flights[fi];
        let stage1 = sc.foc.stage1_levels.as_deref();
        let perf = sc.perf_for(&f.spec);
        let input = match f.state() {
            LifecycleState::Active => {
                let flown = f.flown.as_ref().expect("airborne flights have a trajectory");
                let anchor = anchor_index(flown, secs(self.now_ms), sc.foc.anchor_lead_s as f64)
                    .ok_or_else(|| CommandError::Conflict("too close to arrival".into()))?;
                PlanningInput::in_flight(
                    &sc.airspace,
                    perf,
                    &f.spec,
                    &f.gufi,
                    flown,
                    anchor,
                    stage1,
                    &self.catalogue,
                    &f.learned,
                )
            }
            LifecycleState::Planning
            | LifecycleState::TrialPending
            | LifecycleState::ReadyToFile
            | LifecycleState::Filed
            | LifecycleState::Agreed => {
                PlanningInput::departure(&sc.airspace, perf, &f.spec, &f.gufi, stage1, &self.catalogue, &f.learned)
            }
            s => return Err(CommandError::Conflict(format!("flight is {}", s.name()))),
        };
        let mut ids = f.ids.clone();
        let cands =
            generate_candidates(&input, &[objective], &mut ids).map_err(|e| CommandError::Conflict(e.to_string()))?;
        self.flights[fi].ids = ids;
        self.add_candidates(fi, cands.clone());
        Ok(cands)
    }
}

#[cfg(test)]
mod tests;
