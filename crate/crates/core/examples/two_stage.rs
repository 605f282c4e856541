//! Two-stage optimization of one flight: stage-1 route, then the ideal and
//! the constrained vertical profile on it.
//!
//! cargo run -p tbo-foc --example two_stage -- [scenario.json] [flight-index]

use std::path::PathBuf;

use tbo_foc::foc::{generate_candidates, CandidateIds, PlanningInput};
use tbo_foc::protocol::GufiAllocator;
use tbo_foc::scenario::{bundled_path, load_scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| bundled_path("eddf-sbgr"));
    let index: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

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
    let candidates = generate_candidates(&input, &spec.objectives, &mut CandidateIds::default())?;

    println!("{gufi}  {} -> {}", spec.origin, spec.destination);
    let baseline = candidates[0].trajectory.total_fuel();
    for c in &candidates {
        let t = &c.trajectory;
        let mut levels: Vec<String> = t.points().iter().map(|p| p.level.value().to_string()).collect();
        levels.dedup();
        println!(
            "{:<9?} {:<18?} fuel {:>9.1} kg  saving {:>7.1} kg ({:>5.2}%)  time {:>7.0} s  {} points  levels {}",
            c.objective,
            c.provenance,
            t.total_fuel(),
            baseline - t.total_fuel(),
            100.0 * (baseline - t.total_fuel()) / baseline,
            t.duration_s(),
            t.points().len(),
            levels.join(">"),
        );
    }
    Ok(())
}
