//! The three entry points: batch run, offline plan validation and the
//! HTTP service. Each returns a process exit code and writes diagnostics to
//! the given stream, so they can be exercised in tests.

use std::io::Write;
use std::net::SocketAddr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tbo_foc::foc::filed_candidate;
use tbo_foc::perf::FlightLevel;
use tbo_foc::protocol::{make_trial_request, GufiAllocator, ReplyStatus};
use tbo_foc::report::write_artifacts;
use tbo_foc::scenario::{load_scenario, FiledPlan, Scenario};
use tbo_foc::sim::{SimError, Simulation};
use tbo_foc::trajectory::VcpKind;
use tbo_foc::validator::Validator;

use crate::api::router;
use crate::engine::SimHandle;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SCENARIO: i32 = 2;
pub const EXIT_DEADLOCK: i32 = 3;
pub const EXIT_NEGOTIATE: i32 = 4;
pub const EXIT_NON_CONCUR: i32 = 5;
/// `cmd_validate` reports plans that cannot be sent with the scenario
/// error code: both mean "no validation happened" ("n/a").
pub const EXIT_NOT_APPLICABLE: i32 = EXIT_SCENARIO;

/// Run a scenario to completion and write its artifacts into `out_dir`:
/// `events.log`, `report.json`, `latency.csv`, `status.csv`.
pub fn cmd_run(scenario: &Path, seed: u64, out_dir: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let scenario = match load_scenario(scenario) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_SCENARIO;
        }
    };
    let mut sim = match Simulation::new(scenario, seed) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_SCENARIO;
        }
    };
    let result = sim.run_to_end();
    let report = match write_artifacts(&sim, out_dir) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: cannot write artifacts to {}: {e}", out_dir.display());
            return EXIT_SCENARIO;
        }
    };
    match result {
        Ok(()) => {
            let _ = writeln!(out, "{}: {} flights, seed {}", report.scenario_id, report.flights.len(), seed);
            for row in &report.status_distribution {
                let _ = writeln!(out, "  {:<10} {:>4} {:>7.2}%", row.status, row.count, row.pct);
            }
            let _ = writeln!(out, "artifacts in {}", out_dir.display());
            EXIT_OK
        }
        Err(e @ SimError::ScenarioDeadlock(_)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DEADLOCK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_SCENARIO
        }
    }
}

/// A plan to validate offline: the route and levels of one scenario flight,
/// optionally with authored change-point tags and an explicit eASP (the one
/// controlling the origin otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanFile {
    #[serde(default)]
    pub flight: usize,
    pub route: Vec<String>,
    pub levels: Vec<FlightLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vcps: Option<Vec<(usize, VcpKind)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub easp: Option<String>,
}

fn origin_easp(scenario: &Scenario, origin: &str) -> Option<String> {
    let pos = scenario.airspace.waypoint(origin)?.position;
    match scenario.airspace.controlling_easp(&pos) {
        Ok(id) => Some(id.to_string()),
        Err(_) => scenario.easp_ids().into_iter().next(),
    }
}

/// Validate one plan against an eASP's initial ruleset and print the
/// outcome. Exit 0 CONCUR, 4 NEGOTIATE, 5 NON_CONCUR, 2 when the plan
/// cannot be read, built or converted into a request ("n/a").
pub fn cmd_validate(plan: &Path, scenario: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let scenario = match load_scenario(scenario) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_SCENARIO;
        }
    };
    let na = |err: &mut dyn Write, why: String| {
        let _ = writeln!(err, "n/a: {why}");
        EXIT_NOT_APPLICABLE
    };
    let text = match std::fs::read_to_string(plan) {
        Ok(t) => t,
        Err(e) => return na(err, format!("cannot read {}: {e}", plan.display())),
    };
    let p: PlanFile = match serde_json::from_str(&text) {
        Ok(p) => p,
        Err(e) => return na(err, format!("cannot parse plan: {e}")),
    };
    let Some(spec) = scenario.flights.get(p.flight) else {
        return na(err, format!("scenario has no flight {}", p.flight));
    };
    let easp = match p.easp.clone().or_else(|| origin_easp(&scenario, &spec.origin)) {
        Some(e) if scenario.easp_ids().contains(&e) => e,
        other => return na(err, format!("unknown eASP {}", other.unwrap_or_default())),
    };
    let gufi = match GufiAllocator::default().allocate(&spec.operator, &spec.origin, &spec.destination, spec.departure_time) {
        Ok(g) => g,
        Err(e) => return na(err, e.to_string()),
    };
    let filed = FiledPlan {
        route: p.route,
        levels: p.levels,
        vcps: p.vcps,
    };
    let perf = scenario.perf_for(spec);
    let cand = match filed_candidate(&scenario.airspace, perf, spec, &filed, &gufi, format!("{gufi}-PLAN")) {
        Ok(c) => c,
        Err(e) => return na(err, format!("plan cannot be built: {e}")),
    };
    if let Err(e) = make_trial_request(&cand, &scenario.airspace, "PLAN".into(), "FOC", &easp, 0) {
        return na(err, e.to_string());
    }
    let ruleset = scenario.initial_ruleset(&easp);
    let outcome = Validator::new(&scenario.airspace, perf, &ruleset).validate(&cand.trajectory, 0);
    let _ = writeln!(out, "{} {} (eASP {easp}, ruleset v{})", gufi, outcome.status.name(), outcome.ruleset_version);
    for r in &outcome.evaluated_rules {
        let _ = writeln!(out, "  {:<12} {}", r.rule_id, if r.passed { "PASS" } else { "FAIL" });
    }
    for e in &outcome.errors {
        let tag = if e.actionable { "" } else { " [not actionable]" };
        let _ = writeln!(out, "  {}{tag}", e.message);
    }
    if let Some(rule) = &outcome.proposal_rule {
        let _ = writeln!(out, "  proposal offered for {rule}");
    }
    match outcome.status {
        ReplyStatus::Concur => EXIT_OK,
        ReplyStatus::Negotiate => EXIT_NEGOTIATE,
        ReplyStatus::NonConcur => EXIT_NON_CONCUR,
    }
}

/// Serve the HTTP API on `addr` until the process is stopped.
pub async fn cmd_serve(scenario: &Path, seed: u64, addr: SocketAddr, speed: f64, paused: bool, err: &mut (dyn Write + Send)) -> i32 {
    let scenario = match load_scenario(scenario) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_SCENARIO;
        }
    };
    if !(speed.is_finite() && speed > 0.0) {
        let _ = writeln!(err, "error: speed must be positive, got {speed}");
        return EXIT_SCENARIO;
    }
    let sim = match Simulation::new(scenario, seed) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_SCENARIO;
        }
    };
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "error: cannot listen on {addr}: {e}");
            return 1;
        }
    };
    let local = listener.local_addr().map(|a| a.to_string()).unwrap_or_else(|_| addr.to_string());
    let _ = writeln!(err, "listening on http://{local}");
    let app = router(SimHandle::spawn(sim, speed, paused));
    match axum::serve(listener, app).await {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
