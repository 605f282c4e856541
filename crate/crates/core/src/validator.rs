//! The eASP validation engine: evaluates a trajectory against a versioned
//! ruleset and derives CONCUR / NEGOTIATE (with a proposal) / NON_CONCUR.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airspace::{AirspaceModel, Binding, ConstraintRule, RuleKind, Ruleset, SegmentRef};
use crate::perf::{AircraftPerformanceModel, FlightLevel};
use crate::planning::{build_points, cap_applies, splice, StartState};
use crate::protocol::{ReplyBody, ReplyStatus, ValidationError};
use crate::trajectory::{Trajectory4D, VcpKind};

/// Which vertical change point placement rule a violation breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlacementRule {
    /// Change point on an unpublished waypoint.
    R1,
    /// Change point coincident with TOC (or another change point).
    R2a,
    /// Cruise level change at or before the TOC.
    R2b,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VcpViolation {
    pub rule: PlacementRule,
    pub index: usize,
    pub waypoint: String,
}

/// One violation per offending change point:
/// - R1: a tagged point on an unpublished waypoint;
/// - R2a: a level change starting at the TOC point, or a tagged point that
///   shares its waypoint with an earlier tagged point;
/// - R2b: a cruise level change tagged at or before the TOC.
pub fn check_vcp_placement(traj: &Trajectory4D, model: &AirspaceModel) -> Vec<VcpViolation> {
    let pts = traj.points();
    let mut out = vec![];
    let mut push = |rule, index: usize| {
        out.push(VcpViolation {
            rule,
            index,
            waypoint: pts[index].waypoint_id.clone(),
        })
    };
    let toc = traj.vcp_index(VcpKind::Toc);
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for (i, p) in pts.iter().enumerate() {
        let Some(kind) = p.vcp else { continue };
        if !model.is_published(&p.waypoint_id) {
            push(PlacementRule::R1, i);
        }
        let change_at_toc = kind == VcpKind::Toc && pts.get(i + 1).is_some_and(|q| q.level != p.level);
        if change_at_toc || !seen.insert(&p.waypoint_id) {
            push(PlacementRule::R2a, i);
        }
        if kind == VcpKind::CruiseLevelChange && toc.is_some_and(|c| i <= c) {
            push(PlacementRule::R2b, i);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEvaluation {
    pub rule_id: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub status: ReplyStatus,
    pub ruleset_version: u64,
    pub evaluated_rules: Vec<RuleEvaluation>,
    pub errors: Vec<ValidationError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<Trajectory4D>,
    /// The discretionary rule the proposal addresses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal_rule: Option<String>,
}

impl ValidationOutcome {
    pub fn reply(&self) -> ReplyBody {
        ReplyBody::new(self.status, self.errors.clone(), self.proposal.clone(), self.ruleset_version)
            .expect("outcomes satisfy reply invariants")
    }

    pub fn failed(&self) -> BTreeSet<&str> {
        self.evaluated_rules
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.rule_id.as_str())
            .collect()
    }
}

/// Rule id reported when a trajectory uses a hop that is not an airway.
pub const UNKNOWN_SEGMENT_RULE: &str = "AIRWAY";

/// Everything the eASP needs to evaluate and to build proposals.
#[derive(Debug, Clone, Copy)]
pub struct Validator<'a> {
    pub model: &'a AirspaceModel,
    pub perf: &'a AircraftPerformanceModel,
    pub ruleset: &'a Ruleset,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProposalError {
    #[error("rule {0} has no proposal: the alternative is blocked or unavailable")]
    NoProposal(String),
}

/// First failing location of `rule` over segments/points at index ≥ `scope`.
fn first_failure(
    rule: &ConstraintRule,
    traj: &Trajectory4D,
    model: &AirspaceModel,
    vcps: &[VcpViolation],
    scope: usize,
) -> Option<Binding> {
    let pts = traj.points();
    let seg_binding = |k: usize| Binding {
        waypoint: Some(pts[k].waypoint_id.clone()),
        segment: Some(SegmentRef::new(&pts[k].waypoint_id, &pts[k + 1].waypoint_id).label()),
        level: Some(pts[k + 1].level),
    };
    let segs = scope..pts.len().saturating_sub(1);
    let active = |k: usize| rule.active_over(pts[k].eto, pts[k + 1].eto);
    let ab = ab_fn(pts);
    match &rule.kind {
        RuleKind::SegmentClosed(s) => segs
            .clone()
            .find(|&k| {
                let (x, y) = ab(k);
                s.matches_undirected(x, y) && active(k)
            })
            .map(seg_binding),
        RuleKind::LevelCap(cap) => segs
            .clone()
            .find(|&k| {
                let (x, y) = ab(k);
                pts[k + 1].level > cap.max_level && active(k) && cap_applies(model, &cap.scope, x, y)
            })
            .map(|k| Binding {
                level: Some(cap.max_level),
                ..seg_binding(k)
            }),
        RuleKind::FlowPreference(fp) => segs
            .clone()
            .find(|&k| ab(k) == (fp.from.as_str(), fp.to.as_str()) && active(k))
            .map(seg_binding),
        RuleKind::VcpPlacement(_) | RuleKind::CruiseChangeOrder(_) => {
            let wanted = |r: PlacementRule| match rule.kind {
                RuleKind::VcpPlacement(_) => r == PlacementRule::R1,
                _ => r != PlacementRule::R1,
            };
            vcps.iter()
                .find(|v| v.index >= scope && wanted(v.rule) && rule.enabled)
                .map(|v| Binding {
                    waypoint: Some(v.waypoint.clone()),
                    segment: None,
                    level: Some(pts[v.index].level),
                })
        }
    }
}

fn ab_fn<'p>(pts: &'p [crate::trajectory::TrajectoryPoint4D]) -> impl Fn(usize) -> (&'p str, &'p str) + 'p {
    move |k| (pts[k].waypoint_id.as_str(), pts[k + 1].waypoint_id.as_str())
}

impl<'a> Validator<'a> {
    pub fn new(model: &'a AirspaceModel, perf: &'a AircraftPerformanceModel, ruleset: &'a Ruleset) -> Self {
        Validator { model, perf, ruleset }
    }

    /// Failing rules (in priority order) with their first binding, plus every evaluation.
    fn evaluate(&self, traj: &Trajectory4D, scope: usize) -> (Vec<RuleEvaluation>, Vec<(&'a ConstraintRule, Binding)>) {
        let vcps = check_vcp_placement(traj, self.model);
        let mut evals = vec![];
        let mut failures = vec![];
        for rule in self.ruleset.enabled() {
            let fail = first_failure(rule, traj, self.model, &vcps, scope);
            evals.push(RuleEvaluation {
                rule_id: rule.id.clone(),
                passed: fail.is_none(),
            });
            if let Some(b) = fail {
                failures.push((rule, b));
            }
        }
        (evals, failures)
    }

    /// Hops of the trajectory (from `scope`) that are not airways.
    fn unknown_segment(&self, traj: &Trajectory4D, scope: usize) -> Option<String> {
        let pts = traj.points();
        (scope..pts.len() - 1).find_map(|k| {
            let (a, b) = (&pts[k].waypoint_id, &pts[k + 1].waypoint_id);
            self.model.segment(a, b).is_none().then(|| format!("{a}-{b}"))
        })
    }

    /// Validate `traj`, evaluating only segments and change points at
    /// index ≥ `scope` (0 for a full plan, the anchor for a revision).
    pub fn validate(&self, traj: &Trajectory4D, scope: usize) -> ValidationOutcome {
        let version = self.ruleset.version;
        if let Some(seg) = self.unknown_segment(traj, scope) {
            return ValidationOutcome {
                status: ReplyStatus::NonConcur,
                ruleset_version: version,
                evaluated_rules: vec![RuleEvaluation {
                    rule_id: UNKNOWN_SEGMENT_RULE.into(),
                    passed: false,
                }],
                errors: vec![ValidationError {
                    rule_id: UNKNOWN_SEGMENT_RULE.into(),
                    message: format!("segment {seg} is not a published airway"),
                    actionable: true,
                }],
                proposal: None,
                proposal_rule: None,
            };
        }
        let (evaluated_rules, failures) = self.evaluate(traj, scope);
        let error = |(r, b): &(&ConstraintRule, Binding)| ValidationError {
            rule_id: r.id.clone(),
            message: r.render(b),
            actionable: r.actionable,
        };
        let hard: Vec<ValidationError> = failures.iter().filter(|(r, _)| r.is_hard()).map(error).collect();
        if !hard.is_empty() {
            return ValidationOutcome {
                status: ReplyStatus::NonConcur,
                ruleset_version: version,
                evaluated_rules,
                errors: hard,
                proposal: None,
                proposal_rule: None,
            };
        }
        if failures.is_empty() {
            return ValidationOutcome {
                status: ReplyStatus::Concur,
                ruleset_version: version,
                evaluated_rules,
                errors: vec![],
                proposal: None,
                proposal_rule: None,
            };
        }
        let proposal = failures
            .iter()
            .find_map(|(r, _)| self.propose_modification(traj, r, scope).ok().map(|p| (p, r.id.clone())));
        ValidationOutcome {
            status: ReplyStatus::Negotiate,
            ruleset_version: version,
            evaluated_rules,
            errors: failures.iter().map(error).collect(),
            proposal_rule: proposal.as_ref().map(|(_, id)| id.clone()),
            proposal: proposal.map(|(p, _)| p),
        }
    }

    /// Minimal rewrite fixing one failing discretionary rule, recomputed
    /// with this eASP's performance and weather. The proposal must not
    /// introduce any failure the input did not already have.
    pub fn propose_modification(
        &self,
        traj: &Trajectory4D,
        rule: &ConstraintRule,
        scope: usize,
    ) -> Result<Trajectory4D, ProposalError> {
        let none = || ProposalError::NoProposal(rule.id.clone());
        let pts = traj.points();
        let route: Vec<String> = pts.iter().map(|p| p.waypoint_id.clone()).collect();
        let levels: Vec<FlightLevel> = pts.iter().map(|p| p.level).collect();
        let ab = ab_fn(pts);
        let (new_route, new_levels, from) = match &rule.kind {
            RuleKind::FlowPreference(fp) => {
                let k = (scope..pts.len() - 1)
                    .find(|&k| ab(k) == (fp.from.as_str(), fp.to.as_str()) && rule.active_over(pts[k].eto, pts[k + 1].eto))
                    .ok_or_else(none)?;
                let mut r = route[..=k].to_vec();
                r.extend(fp.via.iter().cloned());
                r.extend(route[k + 1..].iter().cloned());
                let mut l = levels[..=k].to_vec();
                l.extend(std::iter::repeat_n(levels[k + 1], fp.via.len()));
                l.extend(levels[k + 1..].iter().copied());
                (r, l, k)
            }
            RuleKind::LevelCap(cap) => {
                let mut l = levels.clone();
                let mut first = None;
                for k in scope..pts.len() - 1 {
                    let (a, b) = ab(k);
                    if l[k + 1] > cap.max_level
                        && rule.active_over(pts[k].eto, pts[k + 1].eto)
                        && cap_applies(self.model, &cap.scope, a, b)
                    {
                        let seg = self.model.segment(a, b).ok_or_else(none)?;
                        l[k + 1] = seg
                            .allowed_levels
                            .iter()
                            .rev()
                            .copied()
                            .find(|x| *x <= cap.max_level && self.perf.has_level(*x))
                            .ok_or_else(none)?;
                        first.get_or_insert(k);
                    }
                }
                (route.clone(), l, first.ok_or_else(none)?)
            }
            _ => return Err(none()),
        };
        for k in from..new_route.len() - 1 {
            let ok = self
                .model
                .segment(&new_route[k], &new_route[k + 1])
                .is_some_and(|s| s.allowed_levels.contains(&new_levels[k + 1]));
            if !ok || !self.perf.has_level(new_levels[k + 1]) {
                return Err(none());
            }
        }
        let anchor = &pts[from];
        let start = StartState {
            waypoint: anchor.waypoint_id.clone(),
            level: anchor.level,
            mass: anchor.mass,
            eto: anchor.eto,
        };
        let cont = build_points(self.model, self.perf, &start, &new_route[from..], &new_levels[from..]).map_err(|_| none())?;
        let proposal = splice(&pts[..=from], &cont).map_err(|_| none())?;
        if self.unknown_segment(&proposal, scope).is_some() {
            return Err(none());
        }
        let (_, before) = self.evaluate(traj, scope);
        let (_, after) = self.evaluate(&proposal, scope);
        let before: BTreeSet<&str> = before.iter().map(|(r, _)| r.id.as_str()).collect();
        let sound = after
            .iter()
            .all(|(r, _)| r.id != rule.id && before.contains(r.id.as_str()) && !r.is_hard());
        if sound {
            Ok(proposal)
        } else {
            Err(none())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airspace::test_support::{rect, seg, wp};
    use crate::airspace::{CapScope, FlowPreference, LevelCap, NoParams, RawAirspace, Severity};
    use crate::perf::test_support::{fl, flat_perf};
    use crate::planning::{build_trajectory, walk_phases, Placement, VPhase};
    use crate::trajectory::{tag_levels, StartPhase, TrajectoryPoint4D};
    use proptest::prelude::*;

    fn rule(id: &str, severity: Severity, kind: RuleKind, template: &str) -> ConstraintRule {
        ConstraintRule {
            id: id.into(),
            severity,
            kind,
            message_template: template.into(),
            active_window: None,
            actionable: template.contains("{waypoint}") || template.contains("{segment}"),
            enabled: true,
        }
    }

    /// A - B - C - D - E along the equator with a detour B - X - C, X unpublished-free.
    fn model() -> AirspaceModel {
        let ws = vec![
            wp("A", 0.0, 0.0, true),
            wp("B", 0.0, 1.0, true),
            wp("C", 0.0, 2.0, true),
            wp("D", 0.0, 3.0, false),
            wp("E", 0.0, 4.0, true),
            wp("X", 0.5, 1.5, true),
        ];
        let lv = [300, 320, 340, 360];
        let segs = vec![
            seg(&ws, "A", "B", &lv),
            seg(&ws, "B", "C", &lv),
            seg(&ws, "C", "D", &lv),
            seg(&ws, "D", "E", &lv),
            seg(&ws, "B", "X", &lv),
            seg(&ws, "X", "C", &lv),
        ];
        AirspaceModel::from_raw(RawAirspace {
            waypoints: ws,
            segments: segs,
            firs: vec![rect("EASP-1", -1.0, -1.0, 1.0, 5.0)],
            rules: vec![],
            weather: None,
        })
        .unwrap()
    }

    fn perf() -> AircraftPerformanceModel {
        flat_perf(&[(300, 6000.0), (320, 5800.0), (340, 5600.0), (360, 5500.0)], 460.0, 60.0, 20.0)
    }

    fn plan(m: &AirspaceModel, p: &AircraftPerformanceModel, route: &[&str], levels: &[u32]) -> Trajectory4D {
        let route: Vec<String> = route.iter().map(|s| s.to_string()).collect();
        let levels: Vec<FlightLevel> = levels.iter().map(|&l| fl(l)).collect();
        let start = StartState {
            waypoint: route[0].clone(),
            level: levels[0],
            mass: 200_000.0,
            eto: 1000.0,
        };
        build_trajectory(m, p, &start, &route, &levels).unwrap()
    }

    fn placement_rules() -> Vec<ConstraintRule> {
        vec![
            rule("R1", Severity::Hard, RuleKind::VcpPlacement(NoParams {}), "VCP at unpublished {waypoint}"),
            rule("R2", Severity::Hard, RuleKind::CruiseChangeOrder(NoParams {}), "VCP order violated at {waypoint}"),
        ]
    }

    #[test]
    fn rule_free_airspace_concurs() {
        let (m, p) = (model(), perf());
        let rs = Ruleset::new(vec![]);
        let t = plan(&m, &p, &["A", "B", "C", "D", "E"], &[300, 340, 340, 340, 340]);
        let out = Validator::new(&m, &p, &rs).validate(&t, 0);
        assert_eq!(out.status, ReplyStatus::Concur);
        assert!(out.reply().errors().is_empty());
    }

    #[test]
    fn level_flight_has_no_vcp_violations() {
        let (m, p) = (model(), perf());
        let t = plan(&m, &p, &["A", "B", "C", "D", "E"], &[340; 5]);
        assert!(check_vcp_placement(&t, &m).is_empty());
    }

    #[test]
    fn tod_on_unpublished_waypoint_is_r1() {
        let (m, p) = (model(), perf());
        let t = plan(&m, &p, &["A", "B", "C", "D", "E"], &[340, 340, 340, 340, 300]);
        let v = check_vcp_placement(&t, &m);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].rule, v[0].waypoint.as_str()), (PlacementRule::R1, "D"));
    }

    #[test]
    fn change_at_toc_is_r2_non_concur_naming_waypoint() {
        let (m, p) = (model(), perf());
        let rs = Ruleset::new(placement_rules());
        // Climb ends at B (TOC) and a cruise descent starts right there.
        let t = plan(&m, &p, &["A", "B", "C", "D", "E"], &[300, 340, 320, 320, 320]);
        let v = check_vcp_placement(&t, &m);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!((v[0].rule, v[0].waypoint.as_str()), (PlacementRule::R2a, "B"));
        let out = Validator::new(&m, &p, &rs).validate(&t, 0);
        assert_eq!(out.status, ReplyStatus::NonConcur);
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].rule_id, "R2");
        assert_eq!(out.errors[0].message, "VCP order violated at B");
    }

    #[test]
    fn authored_cruise_change_before_toc_is_r2b() {
        let (m, p) = (model(), perf());
        let t = plan(&m, &p, &["A", "B", "C", "D", "E"], &[300, 320, 340, 340, 340]);
        let mut pts: Vec<TrajectoryPoint4D> = t.points().to_vec();
        // Authored tags: CLC at B, TOC at C.
        for q in pts.iter_mut() {
            q.vcp = None;
        }
        pts[0].vcp = Some(VcpKind::Boc);
        pts[1].vcp = Some(VcpKind::CruiseLevelChange);
        pts[2].vcp = Some(VcpKind::Toc);
        let t = Trajectory4D::new(pts).unwrap();
        let v = check_vcp_placement(&t, &m);
        assert!(v.iter().any(|x| x.rule == PlacementRule::R2b && x.index == 1), "{v:?}");
        let rs = Ruleset::new(placement_rules());
        let out = Validator::new(&m, &p, &rs).validate(&t, 0);
        assert_eq!(out.status, ReplyStatus::NonConcur);
        assert_eq!(out.errors[0].rule_id, "R2");
        assert!(out.errors[0].message.contains('B'), "{}", out.errors[0].message);
    }

    #[test]
    fn flow_preference_negotiates_with_the_alternate() {
        let (m, p) = (model(), perf());
        let fp = FlowPreference {
            from: "B".into(),
            to: "C".into(),
            via: vec!["X".into()],
        };
        let rs = Ruleset::new(vec![rule(
            "FLOW1",
            Severity::Discretionary,
            RuleKind::FlowPreference(fp),
            "please avoid {segment}",
        )]);
        let t = plan(&m, &p, &["A", "B", "C", "D", "E"], &[340; 5]);
        let out = Validator::new(&m, &p, &rs).validate(&t, 0);
        assert_eq!(out.status, ReplyStatus::Negotiate);
        let prop = out.proposal.clone().unwrap();
        assert_eq!(prop.waypoint_ids(), vec!["A", "B", "X", "C", "D", "E"]);
        assert!(prop.total_fuel() > t.total_fuel());
        assert_eq!(out.errors[0].message, "please avoid B-C");
        // Soundness and idempotence.
        let again = Validator::new(&m, &p, &rs).validate(&prop, 0);
        assert_eq!(again.status, ReplyStatus::Concur);
        assert_eq!(Validator::new(&m, &p, &rs).validate(&prop, 0), again);
    }

    #[test]
    fn blocked_alternate_gives_no_proposal() {
        let (m, p) = (model(), perf());
        let fp = FlowPreference {
            from: "B".into(),
            to: "C".into(),
            via: vec!["X".into()],
        };
        let flow = rule("FLOW1", Severity::Discretionary, RuleKind::FlowPreference(fp), "avoid {segment}");
        let closed = rule(
            "CLOSED",
            Severity::Hard,
            RuleKind::SegmentClosed(SegmentRef::new("X", "C")),
            "{segment} closed",
        );
        let rs = Ruleset::new(vec![flow.clone(), closed]);
        let t = plan(&m, &p, &["A", "B", "C", "D", "E"], &[340; 5]);
        let v = Validator::new(&m, &p, &rs);
        assert_eq!(v.propose_modification(&t, &flow, 0), Err(ProposalError::NoProposal("FLOW1".into())));
        let out = v.validate(&t, 0);
        assert_eq!(out.status, ReplyStatus::Negotiate);
        assert!(out.proposal.is_none());
    }

    #[test]
    fn discretionary_level_cap_clamps_and_recomputes() {
        let (m, p) = (model(), perf());
        let cap = rule(
            "CAP",
            Severity::Discretionary,
            RuleKind::LevelCap(LevelCap {
                max_level: fl(340),
                scope: CapScope::Fir("EASP-1".into()),
            }),
            "level above cap on {segment}",
        );
        let rs = Ruleset::new(vec![cap]);
        let t = plan(&m, &p, &["A", "B", "C", "D", "E"], &[360; 5]);
        let out = Validator::new(&m, &p, &rs).validate(&t, 0);
        assert_eq!(out.status, ReplyStatus::Negotiate);
        let prop = out.proposal.unwrap();
        assert_eq!(&prop.levels()[1..], &[fl(340); 4]);
        // Oracle: fuel recomputed from scratch along the clamped profile.
        let oracle = plan(&m, &p, &["A", "B", "C", "D", "E"], &[360, 340, 340, 340, 340]);
        assert!((prop.total_fuel() - oracle.total_fuel()).abs() < 1e-9);
    }

    #[test]
    fn hard_closure_is_non_concur_and_scoped() {
        let (m, p) = (model(), perf());
        let rs = Ruleset::new(vec![rule(
            "R3",
            Severity::Hard,
            RuleKind::SegmentClosed(SegmentRef::new("A", "B")),
            "{segment} is closed",
        )]);
        let t = plan(&m, &p, &["A", "B", "C", "D", "E"], &[340; 5]);
        let v = Validator::new(&m, &p, &rs);
        let out = v.validate(&t, 0);
        assert_eq!(out.status, ReplyStatus::NonConcur);
        assert_eq!(out.errors[0].message, "A-B is closed");
        assert!(out.errors[0].actionable);
        // The closed segment is behind the anchor of a revision.
        assert_eq!(v.validate(&t, 1).status, ReplyStatus::Concur);
    }

    /// Untagged level sequence of a plan.
    fn levels_of(v: &[u32]) -> Vec<FlightLevel> {
        v.iter().map(|&l| fl(l)).collect()
    }

    fn line_model(published: &[bool]) -> AirspaceModel {
        let ws: Vec<_> = published
            .iter()
            .enumerate()
            .map(|(i, &p)| wp(&format!("P{i}"), 0.0, i as f64, p))
            .collect();
        let segs = (0..published.len() - 1)
            .map(|i| seg(&ws, &format!("P{i}"), &format!("P{}", i + 1), &[300, 320, 340, 360]))
            .collect();
        AirspaceModel::from_raw(RawAirspace {
            waypoints: ws,
            segments: segs,
            firs: vec![],
            rules: vec![],
            weather: None,
        })
        .unwrap()
    }

    proptest! {
        /// The planner's placement automaton accepts a level schedule exactly
        /// when the tagged trajectory has no R1/R2 violations.
        #[test]
        fn planner_automaton_agrees_with_validator(
            raw in proptest::collection::vec((0usize..4, any::<bool>()), 2..9),
        ) {
            let lv = [300u32, 320, 340, 360];
            let published: Vec<bool> = raw.iter().map(|x| x.1).collect();
            let levels = levels_of(&raw.iter().map(|x| lv[x.0]).collect::<Vec<_>>());
            let m = line_model(&published);
            let pts: Vec<TrajectoryPoint4D> = tag_levels(&levels, StartPhase::Origin)
                .into_iter()
                .enumerate()
                .map(|(i, tag)| TrajectoryPoint4D {
                    waypoint_id: format!("P{i}"),
                    position: m.position(&format!("P{i}")).unwrap(),
                    level: levels[i],
                    eto: 60.0 * i as f64,
                    mass: 100_000.0 - 10.0 * i as f64,
                    vcp: tag,
                })
                .collect();
            let t = Trajectory4D::new(pts).unwrap();
            let clean = check_vcp_placement(&t, &m).is_empty();
            let walk = walk_phases(&levels, &published, VPhase::Origin, Placement::ALL)
                .is_some_and(|end| end.can_finish(*published.last().unwrap(), Placement::ALL));
            prop_assert_eq!(walk, clean, "levels {:?} published {:?}", levels, published);
        }
    }
}
