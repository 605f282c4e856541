//! Latency statistics of the leg1-latency scenario under the default
//! latency configuration.

use std::collections::BTreeSet;

use tbo_foc::scenario::{bundled_path, load_scenario, LatencyConfig};
use tbo_foc::sim::analysis::{downlink_phase_latency, phase_latency_spearman, round_trips};
use tbo_foc::sim::Simulation;
use tbo_foc::stats::{mad, population_sd};

/// The seed the bundled scenario is documented with.
const SEED: u64 = 1;

struct Stats {
    n: usize,
    sd: f64,
    mad: f64,
    rho: f64,
}

fn run(seed: u64) -> (Simulation, Stats) {
    let scenario = load_scenario(bundled_path("leg1-latency")).unwrap();
    assert_eq!(scenario.latency, LatencyConfig::default());
    let mut sim = Simulation::new(scenario, seed).unwrap();
    sim.run_to_end().unwrap();
    let samples = downlink_phase_latency(sim.log());
    let phases: BTreeSet<u64> = samples.iter().map(|(p, _)| *p as u64).collect();
    assert_eq!(phases.len(), 3, "downlinks cover climb, cruise and descent");
    let latencies: Vec<f64> = samples.into_iter().map(|(_, l)| l).collect();
    let stats = Stats {
        n: latencies.len(),
        sd: population_sd(&latencies).unwrap(),
        mad: mad(&latencies).unwrap(),
        rho: phase_latency_spearman(sim.log()).unwrap(),
    };
    (sim, stats)
}

fn in_band(s: &Stats) -> bool {
    (6.0..=9.0).contains(&s.sd) && (1.6..=2.4).contains(&s.mad) && s.rho.abs() < 0.1
}

#[test]
fn ground_round_trips_within_three_seconds() {
    let (sim, _) = run(SEED);
    let trips = round_trips(sim.log());
    assert!(trips.len() >= 4);
    for t in trips {
        assert!((0..=3000).contains(&t.rtt_ms()), "{t:?}");
    }
}

#[test]
fn downlink_statistics_in_band() {
    let (_, s) = run(SEED);
    assert!(s.n >= 500, "{} downlinks", s.n);
    assert!((6.0..=9.0).contains(&s.sd), "sd {}", s.sd);
    assert!((1.6..=2.4).contains(&s.mad), "mad {}", s.mad);
    assert!(s.rho.abs() < 0.1, "rho {}", s.rho);
}

#[test]
fn band_holds_for_most_seeds() {
    // The bands are statistical; the default configuration should not
    // depend on one lucky seed.
    let passing = (1..=12).filter(|&seed| in_band(&run(seed).1)).count();
    assert!(passing >= 10, "{passing}/12 seeds in band");
}
