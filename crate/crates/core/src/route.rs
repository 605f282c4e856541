//! Stage-1 horizontal optimization: A* over (waypoint, level, mass bucket,
//! vertical phase) with a consistent distance-based heuristic.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::airspace::{AirspaceModel, ConstraintRule, DISTANCE_TOLERANCE};
use crate::geo::great_circle_nm;
use crate::perf::{AircraftPerformanceModel, FlightLevel};
use crate::planning::{
    finalize, hop_burn, hop_levels, mass_bucket, Constraints, CostKind, PlanError, StartState, VPhase,
};
use crate::trajectory::{Trajectory4D, TrajectoryPoint4D};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub nodes_expanded: u64,
    /// Average successors generated per expansion (the `b` of O(b^d)).
    pub branching_factor_avg: f64,
    /// Hops in the solution (the `d`).
    pub solution_depth: u32,
    /// Wall-clock time; informational only, never written to event logs.
    #[serde(skip)]
    pub runtime_ms: f64,
}

/// Everything a search needs besides the rule set.
#[derive(Debug, Clone)]
pub struct RouteRequest<'a> {
    pub model: &'a AirspaceModel,
    pub perf: &'a AircraftPerformanceModel,
    pub start: StartState,
    pub start_phase: VPhase,
    pub destination: String,
    /// Candidate levels (intersected per hop with airway and table levels).
    pub levels: Vec<FlightLevel>,
    /// Level the final hop must be flown at, if fixed.
    pub final_level: Option<FlightLevel>,
    pub cost: CostKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteResult {
    /// Untagged points from the start waypoint to the destination.
    pub points: Vec<TrajectoryPoint4D>,
    pub cost: f64,
    pub stats: SearchStats,
}

impl RouteResult {
    pub fn trajectory(&self) -> Result<Trajectory4D, PlanError> {
        finalize(self.points.clone())
    }
}

/// Precomputed lower-bound parameters for the heuristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicBounds {
    /// Minimum cost per ground NM anywhere in the table under the strongest wind.
    pub min_cost_per_nm: f64,
    /// Lower bound on airway distance / great circle (segment distances are
    /// within 1% of their great circle).
    pub distance_factor: f64,
    /// Descent credit per 1000 ft; remaining descent can lower the remaining cost.
    pub credit_per_kft: f64,
    pub lowest_level: FlightLevel,
}

impl HeuristicBounds {
    pub fn for_request(req: &RouteRequest) -> Self {
        let max_wind = req.model.max_wind_speed();
        let mut lowest = req.start.level;
        for l in req.levels.iter().chain(req.final_level.iter()) {
            lowest = lowest.min(*l);
        }
        match req.cost {
            CostKind::Fuel => HeuristicBounds {
                min_cost_per_nm: req.perf.min_fuel_per_nm(max_wind),
                distance_factor: 1.0 - DISTANCE_TOLERANCE,
                credit_per_kft: req.perf.descent_credit_kg_per_kft,
                lowest_level: lowest,
            },
            CostKind::Time => HeuristicBounds {
                min_cost_per_nm: 3600.0 / (req.perf.highest_tas() + max_wind),
                distance_factor: 1.0 - DISTANCE_TOLERANCE,
                credit_per_kft: 0.0,
                lowest_level: lowest,
            },
        }
    }
}

/// Lower bound on the remaining cost from a point `dist_nm` (great circle)
/// from the destination at `level`. Consistent: along any hop it drops by no
/// more than the hop's cost, because cruise burn is at least
/// `min_cost_per_nm` per NM and a descent earns exactly the credit subtracted here.
pub fn heuristic(dist_nm: f64, level: FlightLevel, b: &HeuristicBounds) -> f64 {
    let credit = b.credit_per_kft * b.lowest_level.kft_to(level).max(0.0);
    (dist_nm * b.distance_factor * b.min_cost_per_nm - credit).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Frontier entry; ordered by f, then (g, waypoint id, level), then creation.
#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Entry {
    f: OrdF64,
    g: OrdF64,
    wp_id: String,
    level: FlightLevel,
    node: usize,
}

#[derive(Debug, Clone)]
struct Node {
    wp: usize,
    level: FlightLevel,
    phase: VPhase,
    mass: f64,
    eto: f64,
    g: f64,
    parent: Option<usize>,
}

type StateKey = (usize, FlightLevel, i64, VPhase);

pub fn optimize_horizontal(req: &RouteRequest, constraints: &Constraints) -> Result<RouteResult, PlanError> {
    let clock = Instant::now();
    let model = req.model;
    let perf = req.perf;
    perf.check_mass(req.start.mass)?;
    let no_route = || PlanError::NoRoute {
        origin: req.start.waypoint.clone(),
        destination: req.destination.clone(),
    };
    let ids: Vec<&str> = model.waypoints().map(|w| w.id.as_str()).collect();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let (Some(&start), Some(&goal)) = (index.get(req.start.waypoint.as_str()), index.get(req.destination.as_str())) else {
        return Err(no_route());
    };
    if start == goal {
        return Err(no_route());
    }
    let dest_pos = model.position(&req.destination).expect("indexed");
    let h_dist: Vec<f64> = ids
        .iter()
        .map(|id| great_circle_nm(&model.position(id).expect("indexed"), &dest_pos))
        .collect();
    let bounds = HeuristicBounds::for_request(req);
    let dest_published = model.is_published(&req.destination);
    let placement = constraints.placement;

    let mut nodes = vec![Node {
        wp: start,
        level: req.start.level,
        phase: req.start_phase,
        mass: req.start.mass,
        eto: req.start.eto,
        g: 0.0,
        parent: None,
    }];
    let mut best: HashMap<StateKey, f64> = HashMap::new();
    best.insert((start, req.start.level, mass_bucket(req.start.mass), req.start_phase), 0.0);
    let mut frontier = BinaryHeap::new();
    frontier.push(Reverse(Entry {
        f: OrdF64(heuristic(h_dist[start], req.start.level, &bounds)),
        g: OrdF64(0.0),
        wp_id: ids[start].to_string(),
        level: req.start.level,
        node: 0,
    }));
    let mut expanded = 0u64;
    let mut generated = 0u64;

    while let Some(Reverse(e)) = frontier.pop() {
        let n = nodes[e.node].clone();
        let key = (n.wp, n.level, mass_bucket(n.mass), n.phase);
        if best.get(&key).is_some_and(|&b| b < n.g) {
            continue;
        }
        if n.wp == goal {
            let mut chain = vec![e.node];
            while let Some(p) = nodes[*chain.last().expect("non-empty")].parent {
                chain.push(p);
            }
            chain.reverse();
            let points = chain
                .iter()
                .map(|&i| {
                    let q = &nodes[i];
                    TrajectoryPoint4D {
                        waypoint_id: ids[q.wp].to_string(),
                        position: model.position(ids[q.wp]).expect("indexed"),
                        level: q.level,
                        eto: q.eto,
                        mass: q.mass,
                        vcp: None,
                    }
                })
                .collect();
            return Ok(RouteResult {
                points,
                cost: n.g,
                stats: SearchStats {
                    nodes_expanded: expanded,
                    branching_factor_avg: if expanded == 0 { 0.0 } else { generated as f64 / expanded as f64 },
                    solution_depth: (chain.len() - 1) as u32,
                    runtime_ms: clock.elapsed().as_secs_f64() * 1000.0,
                },
            });
        }
        expanded += 1;
        let from_id = ids[n.wp];
        let published = model.is_published(from_id);
        for (to_id, _) in model.neighbors(from_id) {
            let to = index[to_id.as_str()];
            let levels = match (to == goal, req.final_level) {
                (true, Some(fl)) => hop_levels(model, perf, &[fl], from_id, to_id),
                _ => hop_levels(model, perf, &req.levels, from_id, to_id),
            };
            for level in levels {
                let Some(phase) = n.phase.step(n.level, level, published, placement) else {
                    continue;
                };
                if to == goal && !phase.can_finish(dest_published, placement) {
                    continue;
                }
                let Ok(burn) = hop_burn(model, perf, from_id, to_id, n.level, level, n.mass) else {
                    continue;
                };
                let eto = n.eto + burn.time_s;
                if !constraints.hop_allowed(from_id, to_id, n.eto, eto)
                    || !constraints.level_allowed(from_id, to_id, level, n.eto, eto)
                {
                    continue;
                }
                let mass = n.mass - burn.fuel_kg;
                if perf.check_mass(mass).is_err() {
                    continue;
                }
                let g = n.g + req.cost.of(&burn);
                let key = (to, level, mass_bucket(mass), phase);
                if best.get(&key).is_some_and(|&b| b <= g) {
                    continue;
                }
                best.insert(key, g);
                generated += 1;
                nodes.push(Node {
                    wp: to,
                    level,
                    phase,
                    mass,
                    eto,
                    g,
                    parent: Some(e.node),
                });
                frontier.push(Reverse(Entry {
                    f: OrdF64(g + heuristic(h_dist[to], level, &bounds)),
                    g: OrdF64(g),
                    wp_id: to_id.clone(),
                    level,
                    node: nodes.len() - 1,
                }));
            }
        }
    }
    Err(no_route())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedRoute {
    pub route: RouteResult,
    /// Relaxable rules dropped, in drop order.
    pub relaxation_trace: Vec<String>,
}

/// Search with `hard` plus `soft` rules; on failure drop the lowest-priority
/// (last) soft rule and retry until a route is found or only hard rules remain.
pub fn relax_and_retry(
    req: &RouteRequest,
    hard: &[ConstraintRule],
    soft: &[ConstraintRule],
) -> Result<RelaxedRoute, PlanError> {
    let mut kept = soft.len();
    let mut trace = Vec::new();
    loop {
        let rules: Vec<ConstraintRule> = hard.iter().chain(&soft[..kept]).cloned().collect();
        match optimize_horizontal(req, &Constraints::new(req.model, &rules)) {
            Ok(route) => {
                return Ok(RelaxedRoute {
                    route,
                    relaxation_trace: trace,
                })
            }
            Err(PlanError::NoRoute { .. }) if kept > 0 => {
                kept -= 1;
                trace.push(soft[kept].id.clone());
            }
            Err(e) => return Err(e),
        }
    }
}
