//! Three-FIR disruption: every accepted filing or revision is distributed
//! to the FOC, the EFB and exactly the eASPs downstream at acceptance.

use std::collections::BTreeSet;

use tbo_foc::protocol::Payload;
use tbo_foc::scenario::{bundled_path, load_scenario};
use tbo_foc::sim::analysis::{check_agreed_distribution, check_protocol};
use tbo_foc::sim::{Simulation, EFB, FOC};

fn run(seed: u64) -> Simulation {
    let mut sim = Simulation::new(load_scenario(bundled_path("disruption-3fir")).unwrap(), seed).unwrap();
    sim.run_to_end().unwrap();
    sim
}

#[test]
fn agreed_trajectory_distribution_has_no_violations() {
    for seed in 1..=5 {
        let sim = run(seed);
        let model = &sim.scenario().airspace;
        assert_eq!(check_agreed_distribution(sim.log(), model), Vec::<String>::new(), "seed {seed}");
        assert_eq!(check_protocol(sim.log(), model), Vec::<String>::new(), "seed {seed}");
    }
}

#[test]
fn revision_in_first_fir_reaches_both_downstream_easps() {
    let sim = run(1);
    let accepted: Vec<_> = sim
        .log()
        .messages()
        .filter(|m| matches!(&m.payload, Payload::RevisionReply(r) if r.status().accepts()))
        .collect();
    assert!(!accepted.is_empty(), "the closure forces at least one revision");
    let mut saw_two_downstream = false;
    for reply in accepted {
        let corr = reply.correlation_id.as_deref().unwrap();
        let recipients: BTreeSet<&str> = sim
            .log()
            .messages()
            .filter(|m| matches!(m.payload, Payload::AgreedTrajectory(_)) && m.correlation_id.as_deref() == Some(corr))
            .map(|m| m.receiver.as_str())
            .collect();
        assert!(recipients.contains(FOC) && recipients.contains(EFB), "{recipients:?}");
        if reply.sender == "EASP-W" && recipients.contains("EASP-C") && recipients.contains("EASP-E") {
            saw_two_downstream = true;
        }
    }
    assert!(saw_two_downstream, "a revision agreed in the western FIR went to both downstream eASPs");
}
