//! Client-side conversion of a candidate into a TRIAL_REQUEST. Plans whose
//! change points cannot be expressed (unpublished or coincident) fail here,
//! before anything is sent.

use thiserror::Error;

use super::messages::{FficeMessage, Payload, TrajectoryBody};
use crate::airspace::AirspaceModel;
use crate::foc::FlightPlanCandidate;
use crate::trajectory::extract_vcps;
use crate::validator::{check_vcp_placement, PlacementRule};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("cannot build trial request ({rule_id}): {message}")]
pub struct ConversionError {
    pub rule_id: String,
    pub message: String,
}

/// Build the TRIAL_REQUEST for `plan`. The delivery time is filled in by
/// the network; here it equals the send time.
pub fn make_trial_request(
    plan: &FlightPlanCandidate,
    model: &AirspaceModel,
    id: String,
    sender: &str,
    receiver: &str,
    sent_at_ms: i64,
) -> Result<FficeMessage, ConversionError> {
    let traj = &plan.trajectory;
    extract_vcps(traj).map_err(|e| ConversionError {
        rule_id: "VCP".into(),
        message: e.to_string(),
    })?;
    if let Some(v) = check_vcp_placement(traj, model)
        .into_iter()
        .find(|v| matches!(v.rule, PlacementRule::R1 | PlacementRule::R2a))
    {
        let (rule_id, message) = match v.rule {
            PlacementRule::R1 => ("R1", format!("vertical change point at unpublished waypoint {}", v.waypoint)),
            _ => ("R2", format!("coincident vertical change points at {}", v.waypoint)),
        };
        return Err(ConversionError {
            rule_id: rule_id.into(),
            message,
        });
    }
    Ok(FficeMessage {
        id,
        gufi: plan.gufi.clone(),
        sender: sender.into(),
        receiver: receiver.into(),
        sent_at_ms,
        received_at_ms: sent_at_ms,
        correlation_id: None,
        payload: Payload::TrialRequest(TrajectoryBody {
            candidate_id: plan.id.clone(),
            trajectory: traj.clone(),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airspace::test_support::{seg, wp};
    use crate::airspace::RawAirspace;
    use crate::foc::{Objective, Provenance};
    use crate::perf::test_support::{fl, flat_perf};
    use crate::planning::{build_trajectory, StartState};
    use crate::protocol::{Gufi, MessageKind};

    fn setup(published: [bool; 4], levels: [u32; 4]) -> (AirspaceModel, FlightPlanCandidate) {
        let ids = ["A", "B", "C", "D"];
        let ws: Vec<_> = (0..4).map(|i| wp(ids[i], 0.0, i as f64, published[i])).collect();
        let segs = (0..3).map(|i| seg(&ws, ids[i], ids[i + 1], &[300, 320, 340])).collect();
        let m = AirspaceModel::from_raw(RawAirspace {
            waypoints: ws,
            segments: segs,
            firs: vec![],
            rules: vec![],
            weather: None,
        })
        .unwrap();
        let p = flat_perf(&[(300, 6000.0), (320, 5800.0), (340, 5600.0)], 460.0, 60.0, 20.0);
        let start = StartState {
            waypoint: "A".into(),
            level: fl(levels[0]),
            mass: 150_000.0,
            eto: 0.0,
        };
        let route: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
        let lv: Vec<_> = levels.iter().map(|&l| fl(l)).collect();
        let traj = build_trajectory(&m, &p, &start, &route, &lv).unwrap();
        let cand = FlightPlanCandidate {
            id: "c1".into(),
            gufi: Gufi::new("OPR", "A", "D", 0, 0).unwrap(),
            trajectory: traj,
            objective: Objective::MinFuel,
            provenance: Provenance::Stage2Constrained,
            last_status: None,
            relaxation_trace: vec![],
            anchor: 0,
        };
        (m, cand)
    }

    #[test]
    fn valid_plan_becomes_trial_request() {
        let (m, c) = setup([true; 4], [300, 340, 340, 340]);
        let msg = make_trial_request(&c, &m, "m1".into(), "FOC", "EASP", 5).unwrap();
        assert_eq!(msg.kind(), MessageKind::TrialRequest);
        assert_eq!(msg.payload.trajectory(), Some(&c.trajectory));
    }

    #[test]
    fn toc_on_unpublished_waypoint_is_r1() {
        let (m, c) = setup([true, false, true, true], [300, 340, 340, 340]);
        let err = make_trial_request(&c, &m, "m1".into(), "FOC", "EASP", 5).unwrap_err();
        assert_eq!(err.rule_id, "R1");
        assert!(err.message.contains('B'));
    }

    #[test]
    fn cruise_change_at_toc_is_r2() {
        let (m, c) = setup([true; 4], [300, 340, 320, 320]);
        let err = make_trial_request(&c, &m, "m1".into(), "FOC", "EASP", 5).unwrap_err();
        assert_eq!(err.rule_id, "R2");
    }
}
