//! Primitives shared by the route and vertical optimizers: the enforced-rule
//! view of the airspace, the vertical-phase automaton that keeps change points
//! legal during search, and the trajectory builder.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airspace::{AirspaceModel, CapScope, ConstraintRule, RuleKind};
use crate::perf::{segment_burn, AircraftPerformanceModel, FlightLevel, PerfError, SegmentBurn};
use crate::trajectory::{tag_levels, StartPhase, Trajectory4D, TrajectoryError, TrajectoryPoint4D};

/// Mass discretization for search-state identity (kg).
pub const MASS_BUCKET_KG: f64 = 500.0;

pub fn mass_bucket(mass: f64) -> i64 {
    (mass / MASS_BUCKET_KG).floor() as i64
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no route from {origin} to {destination} under the enforced rules")]
    NoRoute { origin: String, destination: String },
    #[error("no flyable segment {from}-{to}")]
    MissingSegment { from: String, to: String },
    #[error("unknown waypoint {0}")]
    UnknownWaypoint(String),
    #[error("route and level schedule lengths differ")]
    ShapeMismatch,
    #[error(transparent)]
    Perf(#[from] PerfError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

/// What an edge costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CostKind {
    Fuel,
    Time,
}

impl CostKind {
    pub fn of(self, burn: &SegmentBurn) -> f64 {
        match self {
            CostKind::Fuel => burn.fuel_kg,
            CostKind::Time => burn.time_s,
        }
    }
}

/// Which vertical-change-point placement rules the planner must honour.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Placement {
    /// R1: tagged points only on published waypoints.
    pub r1: bool,
    /// R2: no level change starting at the TOC point.
    pub r2: bool,
}

impl Placement {
    pub const NONE: Placement = Placement { r1: false, r2: false };
    pub const ALL: Placement = Placement { r1: true, r2: true };
}

/// Where the search is within the vertical profile. Mirrors the tagging rule
/// of [`tag_levels`], so that accepted level sequences produce change points
/// that satisfy the enforced placement rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum VPhase {
    /// At the first point, nothing decided yet.
    Origin,
    /// Inside the initial climb run.
    Climb,
    /// Past TOC and not descending.
    Cruise,
    /// In a descending run. `clean` is false once the run crossed an
    /// unpublished point, after which it must continue to the destination
    /// (levelling off would turn those points into tagged changes).
    Descent { clean: bool },
}

impl VPhase {
    pub fn from_start(start: StartPhase) -> VPhase {
        match start {
            StartPhase::Origin => VPhase::Origin,
            StartPhase::Climb => VPhase::Climb,
            StartPhase::Cruise => VPhase::Cruise,
        }
    }

    /// Phase after leaving a point at level `from` for the next segment at
    /// `to`; `None` when that would break an enforced placement rule.
    /// `published` refers to the point being left.
    pub fn step(self, from: FlightLevel, to: FlightLevel, published: bool, p: Placement) -> Option<VPhase> {
        use std::cmp::Ordering::*;
        let anchor_ok = published || !p.r1;
        match (self, to.cmp(&from)) {
            (VPhase::Origin, Greater) => anchor_ok.then_some(VPhase::Climb),
            (VPhase::Origin, Equal) => Some(VPhase::Cruise),
            (VPhase::Origin, Less) => Some(VPhase::Descent { clean: true }),
            (VPhase::Climb, Greater) => Some(VPhase::Climb),
            (VPhase::Climb, Equal) => anchor_ok.then_some(VPhase::Cruise),
            (VPhase::Climb, Less) => (!p.r2 && anchor_ok).then_some(VPhase::Descent { clean: true }),
            (VPhase::Cruise, Equal) => Some(VPhase::Cruise),
            (VPhase::Cruise, Greater) => anchor_ok.then_some(VPhase::Cruise),
            (VPhase::Cruise, Less) => anchor_ok.then_some(VPhase::Descent { clean: true }),
            (VPhase::Descent { clean }, Less) => Some(VPhase::Descent { clean: clean && anchor_ok }),
            (VPhase::Descent { clean }, Equal) => clean.then_some(VPhase::Cruise),
            (VPhase::Descent { clean }, Greater) => (clean && anchor_ok).then_some(VPhase::Cruise),
        }
    }

    /// Whether a profile may end at the destination in this phase.
    pub fn can_finish(self, dest_published: bool, p: Placement) -> bool {
        match self {
            VPhase::Climb | VPhase::Descent { .. } => dest_published || !p.r1,
            VPhase::Cruise => true,
            VPhase::Origin => false,
        }
    }
}

/// Run the automaton over a level schedule (one level per point).
pub fn walk_phases(levels: &[FlightLevel], published: &[bool], start: VPhase, p: Placement) -> Option<VPhase> {
    let mut phase = start;
    for k in 0..levels.len().saturating_sub(1) {
        phase = phase.step(levels[k], levels[k + 1], published[k], p)?;
    }
    Some(phase)
}

/// The subset of rules a planner enforces, evaluated against the airspace.
#[derive(Debug, Clone)]
pub struct Constraints<'a> {
    model: &'a AirspaceModel,
    rules: Vec<ConstraintRule>,
    pub placement: Placement,
}

impl<'a> Constraints<'a> {
    pub fn new(model: &'a AirspaceModel, rules: &[ConstraintRule]) -> Self {
        let rules: Vec<ConstraintRule> = rules.iter().filter(|r| r.enabled).cloned().collect();
        let placement = Placement {
            r1: rules.iter().any(|r| matches!(r.kind, RuleKind::VcpPlacement(_))),
            r2: rules.iter().any(|r| matches!(r.kind, RuleKind::CruiseChangeOrder(_))),
        };
        Self {
            model,
            rules,
            placement,
        }
    }

    pub fn none(model: &'a AirspaceModel) -> Self {
        Self::new(model, &[])
    }

    pub fn model(&self) -> &'a AirspaceModel {
        self.model
    }

    pub fn rules(&self) -> &[ConstraintRule] {
        &self.rules
    }

    pub fn with_placement(mut self, p: Placement) -> Self {
        self.placement = p;
        self
    }

    /// Can `a → b` be flown during `[t0, t1]` at all?
    pub fn hop_allowed(&self, a: &str, b: &str, t0: f64, t1: f64) -> bool {
        self.rules.iter().all(|r| match &r.kind {
            RuleKind::SegmentClosed(s) => !(s.matches_undirected(a, b) && r.active_over(t0, t1)),
            RuleKind::FlowPreference(fp) => !(fp.from == a && fp.to == b && r.active_over(t0, t1)),
            _ => true,
        })
    }

    /// Can `a → b` be flown at `level` during `[t0, t1]`?
    pub fn level_allowed(&self, a: &str, b: &str, level: FlightLevel, t0: f64, t1: f64) -> bool {
        self.rules.iter().all(|r| match &r.kind {
            RuleKind::LevelCap(cap) => {
                level <= cap.max_level || !r.active_over(t0, t1) || !cap_applies(self.model, &cap.scope, a, b)
            }
            _ => true,
        })
    }
}

/// Whether a level cap's scope covers the hop `a → b`.
pub fn cap_applies(model: &AirspaceModel, scope: &CapScope, a: &str, b: &str) -> bool {
    match scope {
        CapScope::Segments(list) => list.iter().any(|s| s.matches_undirected(a, b)),
        CapScope::Fir(id) => match model.segment_midpoint(a, b) {
            Some(mid) => model.firs().iter().any(|f| &f.easp_id == id && f.contains(&mid)),
            None => false,
        },
    }
}

/// Levels to try on `a → b`: the candidate set intersected with the airway's
/// allowed levels and the performance table.
pub fn hop_levels(
    model: &AirspaceModel,
    perf: &AircraftPerformanceModel,
    candidates: &[FlightLevel],
    a: &str,
    b: &str,
) -> Vec<FlightLevel> {
    let Some(seg) = model.segment(a, b) else {
        return vec![];
    };
    candidates
        .iter()
        .copied()
        .filter(|l| seg.allowed_levels.contains(l) && perf.has_level(*l))
        .collect()
}

/// Burn for one hop, with the level change impulse at its start.
pub fn hop_burn(
    model: &AirspaceModel,
    perf: &AircraftPerformanceModel,
    a: &str,
    b: &str,
    from_level: FlightLevel,
    to_level: FlightLevel,
    mass: f64,
) -> Result<SegmentBurn, PlanError> {
    let leg = model.leg(a, b, to_level).ok_or_else(|| PlanError::MissingSegment {
        from: a.into(),
        to: b.into(),
    })?;
    Ok(segment_burn(from_level, mass, to_level, &leg, perf)?)
}

/// Where a plan starts: a waypoint, the level held there, mass and time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartState {
    pub waypoint: String,
    pub level: FlightLevel,
    pub mass: f64,
    pub eto: f64,
}

/// Untagged 4D points for `route` (starting at `start.waypoint`) flown with
/// `levels` (one per point; `levels[0]` must equal `start.level`).
pub fn build_points(
    model: &AirspaceModel,
    perf: &AircraftPerformanceModel,
    start: &StartState,
    route: &[String],
    levels: &[FlightLevel],
) -> Result<Vec<TrajectoryPoint4D>, PlanError> {
    if route.len() != levels.len() || route.is_empty() || route[0] != start.waypoint {
        return Err(PlanError::ShapeMismatch);
    }
    let pos = |id: &str| model.position(id).ok_or_else(|| PlanError::UnknownWaypoint(id.into()));
    let mut points = vec![TrajectoryPoint4D {
        waypoint_id: start.waypoint.clone(),
        position: pos(&start.waypoint)?,
        level: start.level,
        eto: start.eto,
        mass: start.mass,
        vcp: None,
    }];
    for k in 0..route.len() - 1 {
        let prev = &points[k];
        let burn = hop_burn(model, perf, &route[k], &route[k + 1], prev.level, levels[k + 1], prev.mass)?;
        points.push(TrajectoryPoint4D {
            waypoint_id: route[k + 1].clone(),
            position: pos(&route[k + 1])?,
            level: levels[k + 1],
            eto: prev.eto + burn.time_s,
            mass: prev.mass - burn.fuel_kg,
            vcp: None,
        });
    }
    Ok(points)
}

/// Tag change points from the level sequence and validate.
pub fn finalize(mut points: Vec<TrajectoryPoint4D>) -> Result<Trajectory4D, PlanError> {
    let levels: Vec<FlightLevel> = points.iter().map(|p| p.level).collect();
    for (p, tag) in points.iter_mut().zip(tag_levels(&levels, StartPhase::Origin)) {
        p.vcp = tag;
    }
    Ok(Trajectory4D::new(points)?)
}

pub fn build_trajectory(
    model: &AirspaceModel,
    perf: &AircraftPerformanceModel,
    start: &StartState,
    route: &[String],
    levels: &[FlightLevel],
) -> Result<Trajectory4D, PlanError> {
    finalize(build_points(model, perf, start, route, levels)?)
}

/// `prefix` (already flown / frozen, ending at the anchor) followed by a new
/// continuation that starts at the anchor.
pub fn splice(prefix: &[TrajectoryPoint4D], continuation: &[TrajectoryPoint4D]) -> Result<Trajectory4D, PlanError> {
    let mut pts: Vec<TrajectoryPoint4D> = prefix.to_vec();
    pts.extend(continuation.iter().skip(1).cloned());
    finalize(pts)
}

/// Vertical phase reached at the last point of `prefix` (levels per point).
pub fn phase_after(model: &AirspaceModel, prefix: &[TrajectoryPoint4D], p: Placement) -> VPhase {
    let levels: Vec<FlightLevel> = prefix.iter().map(|q| q.level).collect();
    let published: Vec<bool> = prefix.iter().map(|q| model.is_published(&q.waypoint_id)).collect();
    walk_phases(&levels, &published, VPhase::Origin, p)
        .or_else(|| walk_phases(&levels, &published, VPhase::Origin, Placement::NONE))
        .unwrap_or(VPhase::Cruise)
}
