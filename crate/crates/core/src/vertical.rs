//! Stage-2 vertical optimization: an exact forward dynamic program over
//! (point index, level, mass bucket, vertical phase) on a fixed route.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::airspace::{AirspaceModel, ConstraintRule};
use crate::perf::{AircraftPerformanceModel, FlightLevel};
use crate::planning::{
    build_points, finalize, hop_burn, hop_levels, mass_bucket, walk_phases, Constraints, CostKind, PlanError,
    Placement, StartState, VPhase,
};
use crate::trajectory::{Trajectory4D, VcpKind};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerticalError {
    #[error("baseline profile is infeasible and no alternative exists")]
    InfeasibleBaseline,
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Levels flown on each segment of a fixed route, with the implied change points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalProfile {
    /// One level per segment.
    pub levels: Vec<FlightLevel>,
    pub change_points: Vec<(usize, VcpKind)>,
    pub fuel: f64,
}

impl VerticalProfile {
    pub fn of(traj: &Trajectory4D) -> Self {
        VerticalProfile {
            levels: traj.points()[1..].iter().map(|p| p.level).collect(),
            change_points: traj
                .points()
                .iter()
                .enumerate()
                .filter_map(|(i, p)| p.vcp.map(|k| (i, k)))
                .collect(),
            fuel: traj.total_fuel(),
        }
    }
}

/// A fixed route to profile, flown from `start`.
#[derive(Debug, Clone)]
pub struct VerticalRequest<'a> {
    pub model: &'a AirspaceModel,
    pub perf: &'a AircraftPerformanceModel,
    pub route: Vec<String>,
    pub start: StartState,
    pub start_phase: VPhase,
    /// The (richer) level set explored.
    pub levels: Vec<FlightLevel>,
    pub final_level: Option<FlightLevel>,
    pub cost: CostKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerticalResult {
    pub best: Trajectory4D,
    pub profile: VerticalProfile,
    /// Saving relative to the baseline's whole-flight fuel, percent.
    pub saving_pct: f64,
    /// Saving over the baseline's cruise portion (segments strictly between
    /// its TOC and TOD), percent of the baseline cruise fuel.
    pub cruise_saving_pct: f64,
}

#[derive(Debug, Clone)]
struct DpNode {
    g: f64,
    mass: f64,
    eto: f64,
    level: FlightLevel,
    parent: Option<(i64, FlightLevel, VPhase, usize)>,
}

type Layer = BTreeMap<(FlightLevel, i64, VPhase), DpNode>;

/// Minimum-cost level schedule (one level per point) along the route, or
/// `None` if no schedule satisfies the constraints.
pub fn dp_levels(req: &VerticalRequest, constraints: &Constraints) -> Result<Option<Vec<FlightLevel>>, PlanError> {
    let model = req.model;
    let n = req.route.len();
    if n < 2 || req.route[0] != req.start.waypoint {
        return Err(PlanError::ShapeMismatch);
    }
    let placement = constraints.placement;
    let mut layers: Vec<Layer> = Vec::with_capacity(n);
    let mut first = Layer::new();
    first.insert(
        (req.start.level, mass_bucket(req.start.mass), req.start_phase),
        DpNode {
            g: 0.0,
            mass: req.start.mass,
            eto: req.start.eto,
            level: req.start.level,
            parent: None,
        },
    );
    layers.push(first);
    for k in 0..n - 1 {
        let (a, b) = (req.route[k].as_str(), req.route[k + 1].as_str());
        if model.segment(a, b).is_none() {
            return Err(PlanError::MissingSegment { from: a.into(), to: b.into() });
        }
        let last_hop = k + 2 == n;
        let levels = match (last_hop, req.final_level) {
            (true, Some(fl)) => hop_levels(model, req.perf, &[fl], a, b),
            _ => hop_levels(model, req.perf, &req.levels, a, b),
        };
        let published = model.is_published(a);
        let dest_published = model.is_published(b);
        let mut next = Layer::new();
        for (&(lvl, bucket, phase), node) in &layers[k] {
            for &to in &levels {
                let Some(phase2) = phase.step(lvl, to, published, placement) else {
                    continue;
                };
                if last_hop && !phase2.can_finish(dest_published, placement) {
                    continue;
                }
                let Ok(burn) = hop_burn(model, req.perf, a, b, lvl, to, node.mass) else {
                    continue;
                };
                let eto = node.eto + burn.time_s;
                if !constraints.hop_allowed(a, b, node.eto, eto) || !constraints.level_allowed(a, b, to, node.eto, eto) {
                    continue;
                }
                let mass = node.mass - burn.fuel_kg;
                if req.perf.check_mass(mass).is_err() {
                    continue;
                }
                let g = node.g + req.cost.of(&burn);
                let key = (to, mass_bucket(mass), phase2);
                if next.get(&key).is_some_and(|o: &DpNode| o.g <= g) {
                    continue;
                }
                next.insert(
                    key,
                    DpNode {
                        g,
                        mass,
                        eto,
                        level: to,
                        parent: Some((bucket, lvl, phase, k)),
                    },
                );
            }
        }
        layers.push(next);
    }
    let Some((mut key, _)) = layers[n - 1]
        .iter()
        .min_by(|x, y| x.1.g.total_cmp(&y.1.g))
        .map(|(k, v)| (*k, v.clone()))
    else {
        return Ok(None);
    };
    let mut out = vec![req.start.level; n];
    for k in (0..n).rev() {
        let node = &layers[k][&key];
        out[k] = node.level;
        if let Some((bucket, lvl, phase, _)) = node.parent {
            key = (lvl, bucket, phase);
        }
    }
    Ok(Some(out))
}

/// Whether a level schedule (one per point) is feasible under `constraints`.
pub fn schedule_feasible(req: &VerticalRequest, constraints: &Constraints, levels: &[FlightLevel]) -> bool {
    let model = req.model;
    let published: Vec<bool> = req.route.iter().map(|w| model.is_published(w)).collect();
    let Some(end) = walk_phases(levels, &published, req.start_phase, constraints.placement) else {
        return false;
    };
    if !end.can_finish(*published.last().unwrap_or(&false), constraints.placement) {
        return false;
    }
    let Ok(points) = build_points(model, req.perf, &req.start, &req.route, levels) else {
        return false;
    };
    points.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        let seg_ok = model
            .segment(&a.waypoint_id, &b.waypoint_id)
            .is_some_and(|s| s.allowed_levels.contains(&b.level) && req.perf.has_level(b.level));
        seg_ok
            && constraints.hop_allowed(&a.waypoint_id, &b.waypoint_id, a.eto, b.eto)
            && constraints.level_allowed(&a.waypoint_id, &b.waypoint_id, b.level, a.eto, b.eto)
            && req.perf.check_mass(b.mass).is_ok()
    }) && req.final_level.is_none_or(|fl| levels.last() == Some(&fl))
}

/// Fuel along the route under a profile, mass chained forward.
pub fn profile_fuel(req: &VerticalRequest, segment_levels: &[FlightLevel]) -> Result<f64, PlanError> {
    let mut levels = vec![req.start.level];
    levels.extend_from_slice(segment_levels);
    let points = build_points(req.model, req.perf, &req.start, &req.route, &levels)?;
    Ok(points[0].mass - points[points.len() - 1].mass)
}

fn cost_of(traj: &Trajectory4D, kind: CostKind) -> f64 {
    match kind {
        CostKind::Fuel => traj.total_fuel(),
        CostKind::Time => traj.duration_s(),
    }
}

/// Fuel burnt between point indices `from` and `to`.
fn span_fuel(traj: &Trajectory4D, from: usize, to: usize) -> f64 {
    let p = traj.points();
    p[from].mass - p[to].mass
}

/// Cruise span `[TOC, TOD]` point indices of a trajectory (whole flight if untagged).
pub fn cruise_span(traj: &Trajectory4D) -> (usize, usize) {
    let n = traj.points().len();
    let toc = traj.vcp_index(VcpKind::Toc).unwrap_or(0);
    let tod = traj.vcp_index(VcpKind::Tod).unwrap_or(n - 1).max(toc);
    (toc, tod)
}

/// Optimize the vertical profile of `baseline`'s route. The result is never
/// worse than the baseline when the baseline itself is feasible here.
pub fn optimize_vertical(
    req: &VerticalRequest,
    constraints: &Constraints,
    baseline: &Trajectory4D,
) -> Result<VerticalResult, VerticalError> {
    let baseline_levels = baseline.levels();
    let baseline_ok = schedule_feasible(req, constraints, &baseline_levels);
    let dp = dp_levels(req, constraints)?;
    let dp_traj = match &dp {
        Some(levels) => Some(finalize(build_points(req.model, req.perf, &req.start, &req.route, levels)?)?),
        None => None,
    };
    let best = match (dp_traj, baseline_ok) {
        (Some(t), true) if cost_of(&t, req.cost) > cost_of(baseline, req.cost) => baseline.clone(),
        (Some(t), _) => t,
        (None, true) => baseline.clone(),
        (None, false) => return Err(VerticalError::InfeasibleBaseline),
    };
    let total = baseline.total_fuel();
    let (toc, tod) = cruise_span(baseline);
    let base_cruise = span_fuel(baseline, toc, tod);
    let best_cruise = span_fuel(&best, toc, tod);
    let saving = total - best.total_fuel();
    Ok(VerticalResult {
        profile: VerticalProfile::of(&best),
        saving_pct: saving / total * 100.0,
        cruise_saving_pct: if base_cruise > 0.0 {
            (base_cruise - best_cruise) / base_cruise * 100.0
        } else {
            0.0
        },
        best,
    })
}

/// Both stage-2 profiles of one route.
#[derive(Debug, Clone, PartialEq)]
pub struct StageProfiles {
    /// Placement rules ignored (reporting only, never filed).
    pub ideal: VerticalResult,
    /// Every enforced rule, including change point placement.
    pub constrained: VerticalResult,
}

/// Optimize `baseline`'s route twice: ideal (no placement rules, level caps
/// and closures still apply) and constrained (all of `rules`). The ideal
/// profile is never reported as worse than the constrained one.
pub fn optimize_stages(
    req: &VerticalRequest,
    rules: &[ConstraintRule],
    baseline: &Trajectory4D,
) -> Result<StageProfiles, VerticalError> {
    let constrained_c = Constraints::new(req.model, rules);
    let constrained = optimize_vertical(req, &constrained_c, baseline)?;
    let ideal_c = Constraints::new(req.model, rules).with_placement(Placement::NONE);
    let ideal = match optimize_vertical(req, &ideal_c, baseline) {
        Ok(i) if cost_of(&i.best, req.cost) <= cost_of(&constrained.best, req.cost) => i,
        _ => constrained.clone(),
    };
    Ok(StageProfiles { ideal, constrained })
}
