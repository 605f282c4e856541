//! Post-processors over an event log: latency statistics and protocol
//! invariant checks. They read only the log (plus the airspace for
//! jurisdiction), so they work equally on a live run and a saved file.

use std::collections::{BTreeMap, BTreeSet};

use crate::airspace::AirspaceModel;
use crate::foc::Objective;
use crate::protocol::{FficeMessage, Gufi, MessageKind, Payload, ReplyStatus, ValidationError};
use crate::stats::{latency_rows, spearman, LatencyRow};

use super::log::{EventLog, LogRecord};
use super::{secs, EFB, FOC};

/// A request and the reply correlated to it.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    pub kind: MessageKind,
    pub counterpart: String,
    pub gufi: Gufi,
    pub request_id: String,
    pub sent_at_ms: i64,
    pub replied_at_ms: i64,
}

impl RoundTrip {
    pub fn rtt_ms(&self) -> i64 {
        self.replied_at_ms - self.sent_at_ms
    }
}

/// Every answered request, in reply order.
pub fn round_trips(log: &EventLog) -> Vec<RoundTrip> {
    let mut requests: BTreeMap<&str, &FficeMessage> = BTreeMap::new();
    let mut out = vec![];
    for m in log.messages() {
        if m.kind().reply_kind().is_some() {
            requests.insert(&m.id, m);
        }
        let Some(corr) = m.correlation_id.as_deref() else { continue };
        if let Some(req) = requests.get(corr) {
            if req.kind().reply_kind() == Some(m.kind()) {
                out.push(RoundTrip {
                    kind: req.kind(),
                    counterpart: req.receiver.clone(),
                    gufi: req.gufi.clone(),
                    request_id: req.id.clone(),
                    sent_at_ms: req.sent_at_ms,
                    replied_at_ms: m.received_at_ms,
                });
            }
        }
    }
    out
}

/// Latency samples in seconds keyed by (kind, counterpart): ground round
/// trips per request kind and eASP, plus `("EPP_DOWNLINK", "EFB")`.
pub fn latency_samples(log: &EventLog) -> BTreeMap<(String, String), Vec<f64>> {
    let mut out: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for rt in round_trips(log) {
        out.entry((rt.kind.name().to_string(), rt.counterpart.clone()))
            .or_default()
            .push(rt.rtt_ms() as f64 / 1000.0);
    }
    for (_, latency) in downlink_phase_latency(log) {
        out.entry(("EPP_DOWNLINK".into(), EFB.into())).or_default().push(latency);
    }
    out
}

pub fn latency_stats(log: &EventLog) -> Vec<LatencyRow> {
    latency_rows(&latency_samples(log))
}

/// `(phase ordinal, latency s)` per received downlink.
pub fn downlink_phase_latency(log: &EventLog) -> Vec<(f64, f64)> {
    log.entries()
        .iter()
        .filter_map(|e| match &e.record {
            LogRecord::Downlink { downlink } => Some((
                downlink.phase.ordinal(),
                (downlink.received_at_ms - downlink.sent_at_ms) as f64 / 1000.0,
            )),
            _ => None,
        })
        .collect()
}

/// Spearman correlation between flight phase and downlink latency.
pub fn phase_latency_spearman(log: &EventLog) -> Option<f64> {
    let (p, l): (Vec<f64>, Vec<f64>) = downlink_phase_latency(log).into_iter().unzip();
    spearman(&p, &l)
}

/// Every accepted filing or revision must be followed by AGREED_TRAJECTORY
/// from the accepting eASP, correlated to the request, to exactly the FOC,
/// the EFB and the eASPs downstream at acceptance time; nothing else may
/// carry an agreed trajectory.
pub fn check_agreed_distribution(log: &EventLog, model: &AirspaceModel) -> Vec<String> {
    let mut violations = vec![];
    let mut accepted: BTreeMap<&str, &FficeMessage> = BTreeMap::new();
    let mut groups: BTreeMap<&str, Vec<&FficeMessage>> = BTreeMap::new();
    for m in log.messages() {
        match &m.payload {
            Payload::FilingStatus(r) | Payload::RevisionReply(r) if r.status().accepts() => {
                if let Some(c) = m.correlation_id.as_deref() {
                    accepted.insert(c, m);
                }
            }
            Payload::AgreedTrajectory(_) => match m.correlation_id.as_deref() {
                Some(c) => groups.entry(c).or_default().push(m),
                None => violations.push(format!("{}: AGREED_TRAJECTORY without correlation", m.id)),
            },
            _ => {}
        }
    }
    for (corr, reply) in &accepted {
        let Some(group) = groups.get(corr) else {
            violations.push(format!("acceptance of {corr} was never distributed"));
            continue;
        };
        let first = group[0];
        let Payload::AgreedTrajectory(body) = &first.payload else { unreachable!() };
        let mut expected: BTreeSet<String> = [FOC.to_string(), EFB.to_string()].into();
        expected.extend(model.downstream_easps(&body.trajectory, secs(first.sent_at_ms)));
        let mut got = BTreeSet::new();
        for m in group {
            if m.sender != reply.sender || m.gufi != reply.gufi {
                violations.push(format!("{}: distributed by {} for {}, accepted by {}", m.id, m.sender, m.gufi, reply.sender));
            }
            if m.sent_at_ms != first.sent_at_ms || m.payload != first.payload {
                violations.push(format!("{}: distribution of {corr} is not one consistent broadcast", m.id));
            }
            if !got.insert(m.receiver.clone()) {
                violations.push(format!("{}: {} received {corr} twice", m.id, m.receiver));
            }
        }
        if got != expected {
            violations.push(format!("{corr}: recipients {got:?}, expected {expected:?}"));
        }
    }
    for corr in groups.keys() {
        if !accepted.contains_key(corr) {
            violations.push(format!("AGREED_TRAJECTORY for {corr} without an accepting reply"));
        }
    }
    violations
}

/// A FILING_REQUEST must carry the candidate whose trial reply, the last
/// one the FOC received for the flight, accepted it.
pub fn check_filing_preconditions(log: &EventLog) -> Vec<String> {
    let mut violations = vec![];
    let mut trial_candidate: BTreeMap<&str, &str> = BTreeMap::new();
    let mut last_reply: BTreeMap<&Gufi, (&str, ReplyStatus)> = BTreeMap::new();
    for m in log.messages() {
        match &m.payload {
            Payload::TrialRequest(b) => {
                trial_candidate.insert(&m.id, &b.candidate_id);
            }
            Payload::TrialReply(r) => {
                if let Some(c) = m.correlation_id.as_deref().and_then(|c| trial_candidate.get(c)) {
                    last_reply.insert(&m.gufi, (c, r.status()));
                }
            }
            Payload::FilingRequest(b) => match last_reply.get(&m.gufi) {
                Some((c, s)) if *c == b.candidate_id && s.accepts() => {}
                other => violations.push(format!(
                    "{}: filed {} after last trial reply {other:?}",
                    m.id, b.candidate_id
                )),
            },
            _ => {}
        }
    }
    violations
}

/// Every reply answers exactly one earlier request of the matching kind,
/// between the same two actors and for the same flight.
pub fn check_reply_correlation(log: &EventLog) -> Vec<String> {
    let mut violations = vec![];
    let mut requests: BTreeMap<&str, &FficeMessage> = BTreeMap::new();
    let mut answered = BTreeSet::new();
    for m in log.messages() {
        if m.kind().reply_kind().is_some() {
            requests.insert(&m.id, m);
        }
        if !m.kind().is_reply() {
            continue;
        }
        let corr = m.correlation_id.as_deref().unwrap_or("");
        match requests.get(corr) {
            None => violations.push(format!("{}: reply to unknown request {corr}", m.id)),
            Some(req) => {
                if req.kind().reply_kind() != Some(m.kind())
                    || req.sender != m.receiver
                    || req.receiver != m.sender
                    || req.gufi != m.gufi
                {
                    violations.push(format!("{}: does not match request {}", m.id, req.id));
                }
                if !answered.insert(corr) {
                    violations.push(format!("{}: request {corr} answered twice", m.id));
                }
            }
        }
    }
    violations
}

/// How a flight's first trial went.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOutcome {
    /// Reply status name, or "n/a" when the plan could not be sent.
    pub label: String,
    pub candidate_id: String,
    pub errors: Vec<ValidationError>,
}

pub fn first_trial_outcomes(log: &EventLog) -> BTreeMap<Gufi, FirstOutcome> {
    let mut trial_candidate: BTreeMap<&str, &str> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for e in log.entries() {
        match &e.record {
            LogRecord::ConversionFailed { gufi, candidate_id, .. } => {
                out.entry(gufi.clone()).or_insert_with(|| FirstOutcome {
                    label: "n/a".into(),
                    candidate_id: candidate_id.clone(),
                    errors: vec![],
                });
            }
            LogRecord::Message { message: m } => match &m.payload {
                Payload::TrialRequest(b) => {
                    trial_candidate.insert(&m.id, &b.candidate_id);
                }
                Payload::TrialReply(r) => {
                    let cid = m.correlation_id.as_deref().and_then(|c| trial_candidate.get(c)).copied().unwrap_or("");
                    out.entry(m.gufi.clone()).or_insert_with(|| FirstOutcome {
                        label: r.status().name().into(),
                        candidate_id: cid.into(),
                        errors: r.errors().to_vec(),
                    });
                }
                _ => {}
            },
            _ => {}
        }
    }
    out
}

/// Objective of every candidate the log mentions.
pub fn candidate_objectives(log: &EventLog) -> BTreeMap<String, Objective> {
    log.entries()
        .iter()
        .filter_map(|e| match &e.record {
            LogRecord::Candidate {
                candidate_id, objective, ..
            } => Some((candidate_id.clone(), *objective)),
            _ => None,
        })
        .collect()
}

/// Trial replies, with the objective of the candidate they answer.
pub fn trial_replies_by_objective(log: &EventLog) -> Vec<(Objective, ReplyStatus)> {
    let objectives = candidate_objectives(log);
    let mut trial_candidate: BTreeMap<&str, &str> = BTreeMap::new();
    let mut out = vec![];
    for m in log.messages() {
        match &m.payload {
            Payload::TrialRequest(b) => {
                trial_candidate.insert(&m.id, &b.candidate_id);
            }
            Payload::TrialReply(r) => {
                let cid = m.correlation_id.as_deref().and_then(|c| trial_candidate.get(c));
                if let Some(o) = cid.and_then(|c| objectives.get(*c)) {
                    out.push((*o, r.status()));
                }
            }
            _ => {}
        }
    }
    out
}

/// All protocol invariants at once; empty when the log is clean.
pub fn check_protocol(log: &EventLog, model: &AirspaceModel) -> Vec<String> {
    let mut v = check_reply_correlation(log);
    v.extend(check_filing_preconditions(log));
    v.extend(check_agreed_distribution(log, model));
    for m in log.messages() {
        if let Err(e) = m.check() {
            v.push(format!("{}: {e}", m.id));
        }
    }
    v
}
