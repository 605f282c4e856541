//! Stage-1 A* route search for one flight: first over the bare network,
//! then under the rules the planner would honour for each objective.
//!
//! Costs are optimal over the searched state space (waypoint, level, 500 kg
//! mass bucket). Because fuel flow steps between mass brackets, a
//! constrained search can occasionally land a few kg below the bare one.
//!
//! cargo run -p tbo-foc --example route_search -- [scenario.json] [flight-index]

use std::path::PathBuf;

use tbo_foc::foc::{Objective, PlanningInput};
use tbo_foc::planning::Constraints;
use tbo_foc::protocol::GufiAllocator;
use tbo_foc::route::{optimize_horizontal, relax_and_retry, RouteRequest, RouteResult};
use tbo_foc::scenario::{bundled_path, load_scenario};

fn show(label: &str, r: &RouteResult, trace: &[String]) {
    let route: Vec<&str> = r.points.iter().map(|p| p.waypoint_id.as_str()).collect();
    println!("{label}");
    println!("  route    {}", route.join(" "));
    println!(
        "  cost {:.1}  expanded {}  branching {:.2}  depth {}  {:.1} ms",
        r.cost, r.stats.nodes_expanded, r.stats.branching_factor_avg, r.stats.solution_depth, r.stats.runtime_ms
    );
    if !trace.is_empty() {
        println!("  relaxed  {}", trace.join(", "));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| bundled_path("fig5-corpus"));
    let index: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(12);

    let scenario = load_scenario(&path)?;
    let spec = scenario.flights.get(index).ok_or("no such flight")?;
    let gufi = GufiAllocator::default().allocate(&spec.operator, &spec.origin, &spec.destination, spec.departure_time)?;
    let catalogue = scenario.foc_catalogue();
    let input = PlanningInput::departure(
        &scenario.airspace,
        scenario.perf_for(spec),
        spec,
        &gufi,
        scenario.foc.stage1_levels.as_deref(),
        &catalogue,
        &[],
    );
    println!("{gufi}  {} -> {}\n", spec.origin, spec.destination);

    for objective in [Objective::MinFuel, Objective::MinTime, Objective::Robust] {
        let req = RouteRequest {
            model: input.model,
            perf: input.perf,
            start: input.start.clone(),
            start_phase: input.start_phase,
            destination: input.destination.clone(),
            levels: input.stage1_levels.clone(),
            final_level: input.final_level,
            cost: objective.cost(),
        };
        let bare = optimize_horizontal(&req, &Constraints::none(input.model))?;
        show(&format!("{objective:?}, no rules"), &bare, &[]);
        let (hard, soft) = input.rules_for(objective);
        let ruled = relax_and_retry(&req, &hard, &soft)?;
        show(
            &format!("{objective:?}, {} hard + {} soft rules", hard.len(), soft.len()),
            &ruled.route,
            &ruled.relaxation_trace,
        );
        println!();
    }
    Ok(())
}
