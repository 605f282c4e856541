//! Run a corpus of flights and report how each first trial was answered,
//! with the status distribution over the corpus.
//!
//! cargo run -p tbo-foc --example validation_corpus -- [scenario.json] [seed]

use std::path::PathBuf;

use tbo_foc::report::{RunReport, STATUS_ORDER};
use tbo_foc::scenario::{bundled_path, load_scenario};
use tbo_foc::sim::analysis::first_trial_outcomes;
use tbo_foc::sim::Simulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| bundled_path("fig5-corpus"));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);

    let mut sim = Simulation::new(load_scenario(&path)?, seed)?;
    sim.run_to_end()?;
    let outcomes = first_trial_outcomes(sim.log());
    for f in sim.flights() {
        let objective = f.spec.objectives[0];
        match outcomes.get(&f.gufi) {
            Some(o) => {
                let errors: Vec<String> = o
                    .errors
                    .iter()
                    .map(|e| format!("{}{}", e.rule_id, if e.actionable { "" } else { " (not actionable)" }))
                    .collect();
                println!(
                    "{:<28} {:<9?} {:<10} {:<12?} {}",
                    f.gufi.to_string(),
                    objective,
                    o.label,
                    f.state(),
                    errors.join(", ")
                );
            }
            None => println!("{:<28} {:<9?} (no trial)", f.gufi.to_string(), objective),
        }
    }
    let report = RunReport::from_sim(&sim);
    println!();
    for row in &report.status_distribution {
        println!("{:<10} {:>3}  {:>6.2}%", row.status, row.count, row.pct);
    }
    debug_assert_eq!(report.status_distribution.len(), STATUS_ORDER.len());
    Ok(())
}
