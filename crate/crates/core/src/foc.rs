//! The TBO-enabled FOC: candidates, reply policy and in-flight renegotiation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airspace::{AirspaceModel, ConstraintRule, NoParams, RuleKind, Severity};
use crate::perf::{AircraftPerformanceModel, FlightLevel};
use crate::planning::{build_points, finalize, phase_after, splice, Constraints, CostKind, PlanError, StartState, VPhase};
use crate::protocol::{ConversionError, Gufi, ReplyBody, ReplyStatus};
use crate::route::{relax_and_retry, RouteRequest};
use crate::scenario::{FiledPlan, FlightSpec};
use crate::trajectory::{Trajectory4D, TrajectoryPoint4D};
use crate::vertical::{optimize_stages, VerticalRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Objective {
    MinFuel,
    MinTime,
    /// Minimum fuel with every discretionary rule pre-enforced.
    Robust,
}

impl Objective {
    pub fn cost(self) -> CostKind {
        match self {
            Objective::MinTime => CostKind::Time,
            Objective::MinFuel | Objective::Robust => CostKind::Fuel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NegotiateHandling {
    FileAsIs,
    AdoptProposal,
    Replan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocPolicy {
    #[serde(default = "default_handling")]
    pub negotiate_handling: NegotiateHandling,
    #[serde(default = "default_replans")]
    pub max_replan_iterations: u32,
    #[serde(default = "default_reaction")]
    pub reaction_timer_s: u32,
}

fn default_handling() -> NegotiateHandling {
    NegotiateHandling::AdoptProposal
}
fn default_replans() -> u32 {
    5
}
fn default_reaction() -> u32 {
    30
}

impl Default for FocPolicy {
    fn default() -> Self {
        Self {
            negotiate_handling: default_handling(),
            max_replan_iterations: default_replans(),
            reaction_timer_s: default_reaction(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    Stage1,
    Stage2Ideal,
    Stage2Constrained,
    EaspProposal,
    /// A plan supplied verbatim in the scenario (filed as authored).
    Filed,
}

/// One trajectory the FOC may trial, file or submit as a revision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightPlanCandidate {
    pub id: String,
    pub gufi: Gufi,
    pub trajectory: Trajectory4D,
    pub objective: Objective,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_status: Option<ReplyStatus>,
    /// Soft rules the route search had to drop, in drop order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relaxation_trace: Vec<String>,
    /// Index of the first point this candidate may change (0 before departure).
    #[serde(default, skip_serializing_if = "is_zero")]
    pub anchor: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl FlightPlanCandidate {
    /// Whether this candidate is meant to be sent to an eASP (stage-1 and
    /// ideal profiles are kept for reporting only).
    pub fn is_submittable(&self) -> bool {
        !matches!(self.provenance, Provenance::Stage1 | Provenance::Stage2Ideal)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FocError {
    #[error("no objective produced a plan: {0}")]
    NoRoute(String),
    #[error("replan budget of {0} iterations exhausted")]
    ReplanBudgetExhausted(u32),
}

/// The constraint catalogue as the FOC sees it: every rule it could learn
/// about, their current activation, and which ones its planner already knows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RuleCatalogue {
    rules: Vec<ConstraintRule>,
    known: BTreeSet<String>,
}

impl RuleCatalogue {
    pub fn new(rules: Vec<ConstraintRule>, known: impl IntoIterator<Item = String>) -> Self {
        Self {
            rules,
            known: known.into_iter().collect(),
        }
    }

    pub fn rules(&self) -> &[ConstraintRule] {
        &self.rules
    }

    pub fn is_known(&self, id: &str) -> bool {
        self.known.contains(id)
    }

    /// Constraint notice: a rule switched on or off. Unknown ids are ignored.
    pub fn set_enabled(&mut self, id: &str, enabled: bool) -> bool {
        match self.rules.iter_mut().find(|r| r.id == id) {
            Some(r) => {
                r.enabled = enabled;
                true
            }
            None => false,
        }
    }

    /// Constraint notice: a new rule, known to the planner from now on.
    pub fn install(&mut self, rule: ConstraintRule) {
        self.known.insert(rule.id.clone());
        match self.rules.iter_mut().find(|r| r.id == rule.id) {
            Some(r) => *r = rule,
            None => self.rules.push(rule),
        }
    }

    pub fn get(&self, id: &str) -> Option<&ConstraintRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// The rule behind an error id. Client-side conversion failures report
    /// the placement rule families `R1`/`R2`; those resolve to the matching
    /// catalogue rule, or to a synthetic one when the catalogue has none.
    pub fn resolve(&self, rule_id: &str) -> Option<ConstraintRule> {
        let placement = |kind: RuleKind, template: &str| {
            self.rules
                .iter()
                .find(|r| std::mem::discriminant(&r.kind) == std::mem::discriminant(&kind))
                .cloned()
                .unwrap_or_else(|| ConstraintRule {
                    id: rule_id.to_string(),
                    severity: Severity::Hard,
                    kind,
                    message_template: template.into(),
                    active_window: None,
                    actionable: true,
                    enabled: true,
                })
        };
        match rule_id {
            "R1" => Some(placement(
                RuleKind::VcpPlacement(NoParams {}),
                "{rule}: change point at unpublished waypoint {waypoint}",
            )),
            "R2" => Some(placement(
                RuleKind::CruiseChangeOrder(NoParams {}),
                "{rule}: change point order violated at {waypoint}",
            )),
            _ => self.get(rule_id).cloned(),
        }
    }
}

/// Everything one planning run needs. `prefix` holds the frozen points
/// ending at `start` (empty before departure).
#[derive(Debug, Clone)]
pub struct PlanningInput<'a> {
    pub model: &'a AirspaceModel,
    pub perf: &'a AircraftPerformanceModel,
    pub gufi: &'a Gufi,
    pub prefix: Vec<TrajectoryPoint4D>,
    pub start: StartState,
    pub start_phase: VPhase,
    pub destination: String,
    pub final_level: Option<FlightLevel>,
    /// Coarse level set for the stage-1 route search.
    pub stage1_levels: Vec<FlightLevel>,
    pub catalogue: &'a RuleCatalogue,
    /// Rules this flight's replies taught the planner.
    pub learned: &'a [ConstraintRule],
}

impl<'a> PlanningInput<'a> {
    /// Plan from the origin at the scheduled departure.
    pub fn departure(
        model: &'a AirspaceModel,
        perf: &'a AircraftPerformanceModel,
        spec: &FlightSpec,
        gufi: &'a Gufi,
        stage1_levels: Option<&[FlightLevel]>,
        catalogue: &'a RuleCatalogue,
        learned: &'a [ConstraintRule],
    ) -> Self {
        PlanningInput {
            model,
            perf,
            gufi,
            prefix: vec![],
            start: StartState {
                waypoint: spec.origin.clone(),
                level: spec.initial_level,
                mass: spec.takeoff_mass,
                eto: spec.departure_time as f64,
            },
            start_phase: VPhase::Origin,
            destination: spec.destination.clone(),
            final_level: spec.final_level,
            stage1_levels: stage1_levels.map_or_else(|| perf.levels().to_vec(), <[_]>::to_vec),
            catalogue,
            learned,
        }
    }

    /// Replan the remainder of `agreed` from point `anchor` on.
    #[allow(clippy::too_many_arguments)]
    pub fn in_flight(
        model: &'a AirspaceModel,
        perf: &'a AircraftPerformanceModel,
        spec: &FlightSpec,
        gufi: &'a Gufi,
        agreed: &Trajectory4D,
        anchor: usize,
        stage1_levels: Option<&[FlightLevel]>,
        catalogue: &'a RuleCatalogue,
        learned: &'a [ConstraintRule],
    ) -> Self {
        let mut input = Self::departure(model, perf, spec, gufi, stage1_levels, catalogue, learned);
        let prefix = agreed.points()[..=anchor].to_vec();
        let a = &prefix[anchor];
        input.start = StartState {
            waypoint: a.waypoint_id.clone(),
            level: a.level,
            mass: a.mass,
            eto: a.eto,
        };
        let placement = Constraints::new(model, &input.rules_for(Objective::MinFuel).0).placement;
        input.start_phase = phase_after(model, &prefix, placement);
        input.prefix = prefix;
        input
    }

    /// `(hard, soft)` rules for one objective. Hard: every known hard rule
    /// plus learned ones. Soft (relaxable, priority order): learned
    /// discretionary rules, plus every known discretionary rule for ROBUST.
    pub fn rules_for(&self, objective: Objective) -> (Vec<ConstraintRule>, Vec<ConstraintRule>) {
        let learned: BTreeSet<&str> = self.learned.iter().map(|r| r.id.as_str()).collect();
        let mut hard = vec![];
        let mut soft = vec![];
        for r in self.catalogue.rules() {
            let known = self.catalogue.is_known(&r.id);
            let taught = learned.contains(r.id.as_str());
            if r.is_hard() && (known || taught) {
                hard.push(r.clone());
            } else if !r.is_hard() && (taught || (known && objective == Objective::Robust)) {
                soft.push(r.clone());
            }
        }
        for r in self.learned {
            if self.catalogue.get(&r.id).is_none() {
                if r.is_hard() { hard.push(r.clone()) } else { soft.push(r.clone()) }
            }
        }
        (hard, soft)
    }

    fn full(&self, suffix: &Trajectory4D) -> Result<Trajectory4D, PlanError> {
        if self.prefix.is_empty() {
            Ok(suffix.clone())
        } else {
            splice(&self.prefix, suffix.points())
        }
    }
}

/// Allocates candidate ids `<gufi>-C<nn>`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateIds {
    next: u32,
}

impl CandidateIds {
    pub fn next(&mut self, gufi: &Gufi) -> String {
        self.next += 1;
        format!("{gufi}-C{:02}", self.next)
    }
}

/// Stage-1 route (relax-and-retry) then both stage-2 profiles, per
/// objective. Each objective yields STAGE1, STAGE2_IDEAL and
/// STAGE2_CONSTRAINED candidates; only the last is submittable. Objectives
/// that find no route are skipped; the call fails only if all of them do.
pub fn generate_candidates(
    input: &PlanningInput,
    objectives: &[Objective],
    ids: &mut CandidateIds,
) -> Result<Vec<FlightPlanCandidate>, FocError> {
    let mut out = vec![];
    let mut failures = vec![];
    for &objective in objectives {
        match plan_objective(input, objective) {
            Ok((trajs, trace)) => {
                for (provenance, trajectory) in trajs {
                    out.push(FlightPlanCandidate {
                        id: ids.next(input.gufi),
                        gufi: input.gufi.clone(),
                        trajectory,
                        objective,
                        provenance,
                        last_status: None,
                        relaxation_trace: trace.clone(),
                        anchor: input.prefix.len().saturating_sub(1),
                    });
                }
            }
            Err(e) => failures.push(format!("{objective:?}: {e}")),
        }
    }
    if out.is_empty() {
        return Err(FocError::NoRoute(failures.join("; ")));
    }
    Ok(out)
}

type Planned = (Vec<(Provenance, Trajectory4D)>, Vec<String>);

fn plan_objective(input: &PlanningInput, objective: Objective) -> Result<Planned, String> {
    let (hard, soft) = input.rules_for(objective);
    let cost = objective.cost();
    let route_req = RouteRequest {
        model: input.model,
        perf: input.perf,
        start: input.start.clone(),
        start_phase: input.start_phase,
        destination: input.destination.clone(),
        levels: input.stage1_levels.clone(),
        final_level: input.final_level,
        cost,
    };
    let relaxed = relax_and_retry(&route_req, &hard, &soft).map_err(|e| e.to_string())?;
    let kept: Vec<ConstraintRule> = hard
        .into_iter()
        .chain(soft.into_iter().filter(|r| !relaxed.relaxation_trace.contains(&r.id)))
        .collect();
    let stage1 = finalize(relaxed.route.points.clone()).map_err(|e| e.to_string())?;
    let vreq = VerticalRequest {
        model: input.model,
        perf: input.perf,
        route: stage1.waypoint_ids().into_iter().map(String::from).collect(),
        start: input.start.clone(),
        start_phase: input.start_phase,
        levels: input.perf.levels().to_vec(),
        final_level: input.final_level,
        cost,
    };
    let stages = optimize_stages(&vreq, &kept, &stage1).map_err(|e| e.to_string())?;
    let full = |t: &Trajectory4D| input.full(t).map_err(|e| e.to_string());
    Ok((
        vec![
            (Provenance::Stage1, full(&stage1)?),
            (Provenance::Stage2Ideal, full(&stages.ideal.best)?),
            (Provenance::Stage2Constrained, full(&stages.constrained.best)?),
        ],
        relaxed.relaxation_trace,
    ))
}

/// The plan authored in the scenario, with its change points exactly as
/// written (derived from the levels when the plan does not list them).
pub fn filed_candidate(
    model: &AirspaceModel,
    perf: &AircraftPerformanceModel,
    spec: &FlightSpec,
    plan: &FiledPlan,
    gufi: &Gufi,
    id: String,
) -> Result<FlightPlanCandidate, PlanError> {
    let start = StartState {
        waypoint: spec.origin.clone(),
        level: plan.levels[0],
        mass: spec.takeoff_mass,
        eto: spec.departure_time as f64,
    };
    let mut points = build_points(model, perf, &start, &plan.route, &plan.levels)?;
    let trajectory = match &plan.vcps {
        None => finalize(points)?,
        Some(tags) => {
            for &(i, kind) in tags {
                points[i].vcp = Some(kind);
            }
            Trajectory4D::new(points)?
        }
    };
    Ok(FlightPlanCandidate {
        id,
        gufi: gufi.clone(),
        trajectory,
        objective: spec.objectives[0],
        provenance: Provenance::Filed,
        last_status: None,
        relaxation_trace: vec![],
        anchor: 0,
    })
}

/// What the FOC does with a reply.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplyAction {
    /// File (or, in flight, keep) the candidate as trialled.
    File,
    /// Trial the eASP's proposal as a new candidate.
    AdoptProposal(Trajectory4D),
    /// Add these rule ids to the planner's enforced set and regenerate.
    Replan(Vec<String>),
    /// Hand the flight to a human: the errors cannot be acted on automatically.
    Escalate(String),
}

/// Reply policy. `replans_used` counts earlier replan / adopt iterations
/// for this flight. A NEGOTIATE plan is legal as filed, so once the budget
/// is spent it is filed as is; a NON_CONCUR one is not, which is an error.
pub fn handle_reply(
    candidate: &mut FlightPlanCandidate,
    reply: &ReplyBody,
    policy: &FocPolicy,
    replans_used: u32,
) -> Result<ReplyAction, FocError> {
    candidate.last_status = Some(reply.status());
    let budget_left = replans_used < policy.max_replan_iterations;
    let rule_ids = || reply.errors().iter().map(|e| e.rule_id.clone()).collect::<Vec<_>>();
    Ok(match reply.status() {
        ReplyStatus::Concur => ReplyAction::File,
        ReplyStatus::Negotiate => match policy.negotiate_handling {
            _ if !budget_left => ReplyAction::File,
            NegotiateHandling::FileAsIs => ReplyAction::File,
            NegotiateHandling::AdoptProposal => match reply.proposal() {
                Some(p) => ReplyAction::AdoptProposal(p.clone()),
                None => ReplyAction::Replan(rule_ids()),
            },
            NegotiateHandling::Replan => ReplyAction::Replan(rule_ids()),
        },
        ReplyStatus::NonConcur if !reply.all_actionable() => {
            let msgs: Vec<&str> = reply.errors().iter().map(|e| e.message.as_str()).collect();
            ReplyAction::Escalate(format!("{}: non-actionable rejection: {}", candidate.id, msgs.join("; ")))
        }
        ReplyStatus::NonConcur if !budget_left => {
            return Err(FocError::ReplanBudgetExhausted(policy.max_replan_iterations))
        }
        ReplyStatus::NonConcur => ReplyAction::Replan(rule_ids()),
    })
}

/// A plan that could not even be converted into a trial request: learn the
/// placement rule it broke and regenerate.
pub fn handle_conversion_failure(
    err: &ConversionError,
    policy: &FocPolicy,
    replans_used: u32,
) -> Result<ReplyAction, FocError> {
    if replans_used >= policy.max_replan_iterations {
        return Err(FocError::ReplanBudgetExhausted(policy.max_replan_iterations));
    }
    Ok(ReplyAction::Replan(vec![err.rule_id.clone()]))
}

/// First point at least `lead_s` ahead of `now_s` that still has a segment
/// after it; in-flight replans start there.
pub fn anchor_index(traj: &Trajectory4D, now_s: f64, lead_s: f64) -> Option<usize> {
    let pts = traj.points();
    (1..pts.len() - 1).find(|&k| pts[k].eto >= now_s + lead_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RevisionReason {
    /// The agreed remainder now violates an enforced rule.
    RestoreFeasibility,
    /// A better remainder became available.
    FuelSaving,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Renegotiation {
    /// The notice does not touch the remaining trajectory.
    NotAffected,
    /// Replanning found nothing worth sending.
    NoImprovement { remaining_kg: f64, best_kg: Option<f64> },
    Revise {
        candidate: FlightPlanCandidate,
        reason: RevisionReason,
        remaining_kg: f64,
        new_remaining_kg: f64,
    },
}

/// React to constraint notices for an airborne flight. `input` must come
/// from [`PlanningInput::in_flight`] on `agreed`. A notice matters when the
/// agreed remainder breaks a now-enforced rule, or when a rule was lifted
/// (a shorter route may have opened). The revision is proposed when it
/// restores feasibility or saves more than `min_saving_kg`.
pub fn auto_renegotiate(
    input: &PlanningInput,
    agreed: &Trajectory4D,
    objective: Objective,
    lifted: bool,
    min_saving_kg: f64,
    ids: &mut CandidateIds,
) -> Renegotiation {
    let anchor = input.prefix.len() - 1;
    let pts = agreed.points();
    let remaining_kg = pts[anchor].mass - pts[pts.len() - 1].mass;
    let (hard, _) = input.rules_for(objective);
    let c = Constraints::new(input.model, &hard);
    let feasible = (anchor..pts.len() - 1).all(|k| {
        let (a, b) = (&pts[k].waypoint_id, &pts[k + 1].waypoint_id);
        c.hop_allowed(a, b, pts[k].eto, pts[k + 1].eto) && c.level_allowed(a, b, pts[k + 1].level, pts[k].eto, pts[k + 1].eto)
    });
    if feasible && !lifted {
        return Renegotiation::NotAffected;
    }
    let best = generate_candidates(input, &[objective], ids)
        .ok()
        .and_then(|cs| cs.into_iter().find(|c| c.provenance == Provenance::Stage2Constrained));
    let Some(candidate) = best else {
        return Renegotiation::NoImprovement {
            remaining_kg,
            best_kg: None,
        };
    };
    let new_pts = candidate.trajectory.points();
    let new_remaining_kg = new_pts[anchor].mass - new_pts[new_pts.len() - 1].mass;
    let reason = if !feasible {
        RevisionReason::RestoreFeasibility
    } else if remaining_kg - new_remaining_kg > min_saving_kg {
        RevisionReason::FuelSaving
    } else {
        return Renegotiation::NoImprovement {
            remaining_kg,
            best_kg: Some(new_remaining_kg),
        };
    };
    Renegotiation::Revise {
        candidate,
        reason,
        remaining_kg,
        new_remaining_kg,
    }
}
