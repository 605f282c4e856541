use std::collections::BTreeSet;

use serde_json::{json, Value};

use super::analysis::*;
use super::*;
use crate::geo::{great_circle_nm, GeoPoint};
use crate::protocol::MessageKind;
use crate::scenario::parse_scenario;

const DEP: i64 = 7200;

/// Corridor O-A-B-C-D along the equator with a detour B-X-C; FIR EASP-A
/// west of 4.5°E, EASP-B east of it.
fn scenario_json() -> Value {
    let wps = [
        ("OOOO", 0.0, 0.0),
        ("AAAA", 0.0, 2.0),
        ("BBBB", 0.0, 4.0),
        ("XXXX", 0.6, 5.0),
        ("CCCC", 0.0, 6.0),
        ("DDDD", 0.0, 8.0),
    ];
    let pos = |id: &str| {
        let w = wps.iter().find(|w| w.0 == id).unwrap();
        GeoPoint::new(w.1, w.2).unwrap()
    };
    let seg = |a: &str, b: &str| {
        json!({"from_id": a, "to_id": b, "distance_nm": great_circle_nm(&pos(a), &pos(b)), "allowed_levels": [300, 340]})
    };
    let rect = |id: &str, lon0: f64, lon1: f64| {
        json!({"easp_id": id, "polygon": [
            {"lat": -2.0, "lon": lon0}, {"lat": -2.0, "lon": lon1}, {"lat": 2.0, "lon": lon1}, {"lat": 2.0, "lon": lon0}]})
    };
    json!({
        "id": "corridor",
        "airspace": {
            "waypoints": wps.iter().map(|(id, lat, lon)| json!({"id": id, "position": {"lat": lat, "lon": lon}, "published": true})).collect::<Vec<_>>(),
            "segments": [seg("OOOO", "AAAA"), seg("AAAA", "BBBB"), seg("BBBB", "CCCC"), seg("CCCC", "DDDD"),
                         seg("BBBB", "XXXX"), seg("XXXX", "CCCC")],
            "firs": [rect("EASP-A", -1.0, 4.5), rect("EASP-B", 4.5, 9.0)],
            "rules": [
                {"id": "CAP-B", "severity": "DISCRETIONARY", "kind": "LEVEL_CAP",
                 "params": {"max_level": 300, "scope": {"fir": "EASP-B"}},
                 "message_template": "{rule}: FL{level} above cap on {segment}", "actionable": true, "enabled": false}
            ]
        },
        "aircraft": [{
            "type_code": "T1", "levels": [300, 340],
            "mass_brackets": [{"min_kg": 50000, "max_kg": 100000}],
            "cruise_table": [
                {"level": 300, "bracket": 0, "tas_kt": 450, "fuel_flow_kg_h": 5400},
                {"level": 340, "bracket": 0, "tas_kt": 460, "fuel_flow_kg_h": 5000}],
            "climb_cost_kg_per_kft": 50, "descent_credit_kg_per_kft": 10,
            "min_mass_kg": 50000, "max_mass_kg": 100000
        }],
        "flights": [{"operator": "TST", "origin": "OOOO", "destination": "DDDD", "aircraft": "T1",
                     "departure_time": DEP, "takeoff_mass": 80000, "initial_level": 300}],
        "latency": {},
        "disruptions": [],
        "validation_profiles": {"EASP-A": {"rules": ["CAP-B"]}, "EASP-B": {"rules": ["CAP-B"]}},
        "foc": {"policy": {"reaction_timer_s": 30}}
    })
}

fn run(v: &Value, seed: u64) -> Simulation {
    let s = parse_scenario(&v.to_string()).unwrap();
    let mut sim = Simulation::new(s, seed).unwrap();
    sim.run_to_end().unwrap();
    sim
}

fn kinds(sim: &Simulation) -> Vec<(MessageKind, String, String)> {
    sim.log()
        .messages()
        .map(|m| (m.kind(), m.sender.clone(), m.receiver.clone()))
        .collect()
}

fn route(t: &Trajectory4D) -> Vec<&str> {
    t.waypoint_ids()
}

#[test]
fn nominal_flight_completes_cleanly() {
    let sim = run(&scenario_json(), 1);
    let f = &sim.flights()[0];
    assert_eq!(f.state(), LifecycleState::Completed);
    assert_eq!(f.first_outcome.as_deref(), Some("CONCUR"));
    let k = kinds(&sim);
    use MessageKind::*;
    assert_eq!(k[0], (TrialRequest, FOC.into(), "EASP-A".into()));
    assert_eq!(k[1], (TrialReply, "EASP-A".into(), FOC.into()));
    assert_eq!(k[2].0, FilingRequest);
    assert!(k[3..].iter().any(|x| x.0 == FilingStatus));
    let agreed: BTreeSet<String> = k.iter().filter(|x| x.0 == AgreedTrajectory).map(|x| x.2.clone()).collect();
    assert_eq!(agreed, ["EASP-B", EFB, FOC].map(String::from).into());
    assert!(check_protocol(sim.log(), &sim.scenario().airspace).is_empty());
    let states: Vec<LifecycleState> = f.lifecycle.history.iter().map(|h| h.1).collect();
    use LifecycleState::*;
    assert_eq!(states, vec![Planning, TrialPending, ReadyToFile, Filed, Agreed, Active, Completed]);
    // One downlink per minute of flight, each with EFB latency.
    let n = downlink_phase_latency(sim.log()).len();
    let minutes = f.flown.as_ref().unwrap().duration_s() / 60.0;
    assert!((n as f64 - minutes).abs() <= 1.0, "{n} downlinks over {minutes} min");
    for rt in round_trips(sim.log()) {
        assert!((0..=3000).contains(&rt.rtt_ms()), "{rt:?}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let a = run(&scenario_json(), 5).log().to_text();
    let b = run(&scenario_json(), 5).log().to_text();
    let c = run(&scenario_json(), 6).log().to_text();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(EventLog::parse(&a).unwrap().to_text(), a);
}

#[test]
fn empty_scenario_has_empty_log() {
    let mut v = scenario_json();
    v["flights"] = json!([]);
    let sim = run(&v, 1);
    assert!(sim.log().is_empty());
}

#[test]
fn closure_ahead_triggers_accepted_revision() {
    let mut v = scenario_json();
    v["disruptions"] = json!([{"at": DEP + 600, "action": "CLOSE_SEGMENT", "rule_id": "CL-BC", "from": "BBBB", "to": "CCCC"}]);
    let sim = run(&v, 2);
    let f = &sim.flights()[0];
    assert_eq!(f.state(), LifecycleState::Completed);
    assert_eq!((f.revisions_sent, f.revisions_accepted), (1, 1));
    assert_eq!(route(f.flown.as_ref().unwrap()), vec!["OOOO", "AAAA", "BBBB", "XXXX", "CCCC", "DDDD"]);
    let reneg: Vec<&str> = sim
        .log()
        .entries()
        .iter()
        .filter_map(|e| match &e.record {
            LogRecord::Renegotiation { outcome, .. } => Some(outcome.as_str()),
            _ => None,
        })
        .collect();
    assert_eq!(reneg, vec!["RESTORE_FEASIBILITY"]);
    // The revision was accepted by the eASP controlling the aircraft and
    // distributed to the FOC, the EFB and the downstream eASP.
    let rev = sim.log().messages().find(|m| m.kind() == MessageKind::RevisionRequest).unwrap();
    assert_eq!(rev.receiver, "EASP-A");
    let dist: BTreeSet<&str> = sim
        .log()
        .messages()
        .filter(|m| m.kind() == MessageKind::AgreedTrajectory && m.correlation_id.as_deref() == Some(&rev.id))
        .map(|m| m.receiver.as_str())
        .collect();
    assert_eq!(dist, [EFB, "EASP-B", FOC].into());
    assert!(check_protocol(sim.log(), &sim.scenario().airspace).is_empty());
    // Both eASPs ended up with the revised trajectory.
    for e in sim.easps().values() {
        assert_eq!(route(&e.agreed[&f.gufi]), route(f.flown.as_ref().unwrap()));
    }
}

#[test]
fn closure_behind_is_not_affecting() {
    let mut v = scenario_json();
    v["disruptions"] = json!([{"at": DEP + 600, "action": "CLOSE_SEGMENT", "rule_id": "CL-OA", "from": "OOOO", "to": "AAAA"}]);
    let sim = run(&v, 2);
    let f = &sim.flights()[0];
    assert_eq!(f.revisions_sent, 0);
    assert!(sim.log().entries().iter().any(
        |e| matches!(&e.record, LogRecord::Renegotiation { outcome, .. } if outcome == "NOT_AFFECTED")
    ));
}

#[test]
fn discretionary_activation_yields_easp_proposal() {
    let mut v = scenario_json();
    v["disruptions"] = json!([{"at": DEP + 600, "action": "ACTIVATE", "rule_id": "CAP-B"}]);
    let sim = run(&v, 3);
    let f = &sim.flights()[0];
    let prop = sim.log().messages().find(|m| m.kind() == MessageKind::ProposalRequest).unwrap();
    assert_eq!((prop.sender.as_str(), prop.receiver.as_str()), ("EASP-A", FOC));
    // Default policy adopts: the proposal went back as a revision and was accepted.
    assert_eq!(f.revisions_accepted, 1);
    let flown = f.flown.as_ref().unwrap();
    let capped: Vec<u32> = flown.points()[3..].iter().map(|p| p.level.value()).collect();
    assert!(capped.iter().all(|&l| l <= 300), "{capped:?}");
    assert!(check_protocol(sim.log(), &sim.scenario().airspace).is_empty());

    v["foc"]["policy"]["negotiate_handling"] = json!("FILE_AS_IS");
    let sim = run(&v, 3);
    assert_eq!(sim.flights()[0].revisions_sent, 0);
    assert!(sim
        .log()
        .entries()
        .iter()
        .any(|e| matches!(&e.record, LogRecord::ProposalDeclined { rule_id, .. } if rule_id == "CAP-B")));
}

#[test]
fn departure_delays_small_and_large() {
    let mut v = scenario_json();
    v["flights"][0]["departure_delay_s"] = json!(120);
    let sim = run(&v, 4);
    let f = &sim.flights()[0];
    assert_eq!(f.revisions_sent, 0);
    let upd: BTreeSet<&str> = sim
        .log()
        .messages()
        .filter(|m| m.kind() == MessageKind::TrajectoryUpdate)
        .map(|m| m.receiver.as_str())
        .collect();
    assert_eq!(upd, ["EASP-A", "EASP-B"].into());
    assert_eq!(f.flown.as_ref().unwrap().first().eto, (DEP + 120) as f64);
    assert_eq!(sim.easps()["EASP-B"].agreed[&f.gufi].first().eto, (DEP + 120) as f64);

    v["flights"][0]["departure_delay_s"] = json!(900);
    let sim = run(&v, 4);
    let f = &sim.flights()[0];
    assert_eq!((f.revisions_sent, f.revisions_accepted), (1, 1));
    let rev = sim.log().messages().find(|m| m.kind() == MessageKind::RevisionRequest).unwrap();
    match &rev.payload {
        Payload::RevisionRequest(b) => assert_eq!((b.anchor_index, b.reason.as_str()), (0, "DEPARTURE_DELAY")),
        _ => unreachable!(),
    }
    assert_eq!(f.lifecycle.agreed.as_ref().unwrap().first().eto, (DEP + 900) as f64);
    assert!(check_protocol(sim.log(), &sim.scenario().airspace).is_empty());
}

#[test]
fn connectivity_gap_suppresses_downlinks() {
    let mut v = scenario_json();
    v["flights"][0]["connectivity_gaps"] = json!([[DEP + 600, DEP + 1200]]);
    let sim = run(&v, 1);
    let sent: Vec<i64> = sim
        .log()
        .entries()
        .iter()
        .filter_map(|e| match &e.record {
            LogRecord::Downlink { downlink } => Some(downlink.sent_at_ms / 1000),
            _ => None,
        })
        .collect();
    assert!(sent.iter().all(|&t| !(DEP + 600..=DEP + 1200).contains(&t)));
    assert!(sent.iter().any(|&t| t > DEP + 1200));
}

#[test]
fn operator_commands() {
    let s = parse_scenario(&scenario_json().to_string()).unwrap();
    let mut sim = Simulation::new(s, 1).unwrap();
    let gufi = sim.flights()[0].gufi.clone();
    let unknown = Gufi::new("ZZZ", "A", "B", 1, 0).unwrap();
    assert!(matches!(sim.request_revision(&unknown, "x"), Err(CommandError::NotFound(_))));
    // Before departure: regenerate works, revisions do not.
    sim.run_until((DEP - 1800) * 1000).unwrap();
    let pre = sim.regenerate(&gufi, Objective::MinTime).unwrap();
    assert!(pre.iter().all(|c| c.anchor == 0));
    assert!(matches!(sim.request_revision(&gufi, &pre[2].id), Err(CommandError::Conflict(_))));
    assert!(matches!(sim.request_revision(&gufi, "nope"), Err(CommandError::NotFound(_))));
    // Airborne: pre-departure plans are rejected, in-flight ones submitted.
    sim.run_until((DEP + 300) * 1000).unwrap();
    assert!(matches!(sim.request_revision(&gufi, &pre[2].id), Err(CommandError::Invalid(_))));
    let cands = sim.regenerate(&gufi, Objective::MinFuel).unwrap();
    let c = cands.iter().find(|c| c.provenance == Provenance::Stage2Constrained).unwrap();
    assert!(c.anchor >= 1);
    let req = sim.request_revision(&gufi, &c.id).unwrap();
    assert!(matches!(sim.request_revision(&gufi, &c.id), Err(CommandError::Conflict(_))));
    sim.run_to_end().unwrap();
    let reply = sim
        .log()
        .messages()
        .find(|m| m.kind() == MessageKind::RevisionReply && m.correlation_id.as_deref() == Some(&req))
        .unwrap();
    assert_eq!(reply.payload.reply().unwrap().status(), ReplyStatus::Concur);
    // Completed flights accept neither.
    assert!(matches!(sim.regenerate(&gufi, Objective::MinFuel), Err(CommandError::Conflict(_))));
    assert!(matches!(sim.request_revision(&gufi, &c.id), Err(CommandError::Conflict(_))));
    // Once the anchor has passed, the old candidate no longer fits.
    let s = parse_scenario(&scenario_json().to_string()).unwrap();
    let mut sim = Simulation::new(s, 1).unwrap();
    sim.run_until((DEP + 300) * 1000).unwrap();
    let c = sim.regenerate(&gufi, Objective::MinFuel).unwrap().remove(2);
    sim.run_until((DEP + 2400) * 1000).unwrap();
    assert!(matches!(sim.request_revision(&gufi, &c.id), Err(CommandError::Conflict(_))));
}

#[test]
fn unresolvable_flight_escalates_and_cancels() {
    let mut v = scenario_json();
    // Hard closure of the only way out of the origin, unknown to the planner.
    v["airspace"]["rules"] = json!([{"id": "CL-OA", "severity": "HARD", "kind": "SEGMENT_CLOSED",
        "params": {"from": "OOOO", "to": "AAAA"}, "message_template": "{rule}: airspace closed", "actionable": false}]);
    v["validation_profiles"] = json!({"EASP-A": {"rules": ["CL-OA"]}, "EASP-B": {"rules": []}});
    v["foc"]["planner_rules"] = json!([]);
    let sim = run(&v, 1);
    let f = &sim.flights()[0];
    assert_eq!(f.state(), LifecycleState::Cancelled);
    assert_eq!(f.first_outcome.as_deref(), Some("NON_CONCUR"));
    assert!(f.escalation.as_deref().unwrap().contains("non-actionable"));
    assert!(check_protocol(sim.log(), &sim.scenario().airspace).is_empty());
}

#[test]
fn latency_rows_cover_ground_and_efb() {
    let sim = run(&scenario_json(), 9);
    let rows = latency_stats(sim.log());
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (r.kind.as_str(), r.counterpart.as_str())).collect();
    assert_eq!(keys, vec![("EPP_DOWNLINK", EFB), ("FILING_REQUEST", "EASP-A"), ("TRIAL_REQUEST", "EASP-A")]);
    assert!(phase_latency_spearman(sim.log()).is_some());
}
