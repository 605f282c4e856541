//! Run a scenario through the negotiation network and summarize each
//! flight, the latency statistics and the protocol invariant checks.
//!
//! cargo run -p tbo-foc --example negotiation_run -- [scenario.json] [seed]

use std::path::PathBuf;

use tbo_foc::report::RunReport;
use tbo_foc::scenario::{bundled_path, load_scenario};
use tbo_foc::sim::analysis::check_protocol;
use tbo_foc::sim::log::LogRecord;
use tbo_foc::sim::Simulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| bundled_path("disruption-3fir"));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);

    let mut sim = Simulation::new(load_scenario(&path)?, seed)?;
    sim.run_to_end()?;
    let report = RunReport::from_sim(&sim);
    println!("{} (seed {seed}): {} log entries", report.scenario_id, sim.log().len());
    for f in &report.flights {
        println!(
            "{:<28} {:<10?} first {:<10} revisions {}/{} replans {} {}",
            f.gufi.to_string(),
            f.final_state,
            f.first_status,
            f.revisions_accepted,
            f.revisions_sent,
            f.replans,
            f.escalation.as_deref().unwrap_or(""),
        );
    }
    println!();
    for e in sim.log().entries() {
        match &e.record {
            LogRecord::Disruption { .. } | LogRecord::Renegotiation { .. } | LogRecord::ProposalDeclined { .. } => {
                println!("{:>8.1}s {}", e.at_ms as f64 / 1000.0, serde_json::to_string(&e.record)?);
            }
            _ => {}
        }
    }
    println!();
    for row in &report.latency {
        println!("{row:?}");
    }
    let violations = check_protocol(sim.log(), &sim.scenario().airspace);
    println!("\nprotocol violations: {}", violations.len());
    for v in &violations {
        println!("  {v}");
    }
    Ok(())
}
