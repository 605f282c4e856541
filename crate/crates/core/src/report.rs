//! Run summaries and the artifact set written by a batch run.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::foc::Provenance;
use crate::protocol::{Gufi, LifecycleState};
use crate::sim::analysis::latency_stats;
use crate::sim::{EventLog, FlightState, Simulation, FOC};
use crate::stats::{status_rows, write_csv, LatencyRow, StatusRow};

/// Order of the status-distribution rows.
pub const STATUS_ORDER: [&str; 4] = ["CONCUR", "NEGOTIATE", "NON_CONCUR", "n/a"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlightSummary {
    pub gufi: Gufi,
    pub origin: String,
    pub destination: String,
    pub final_state: LifecycleState,
    /// Outcome of the first trial: a reply status or "n/a".
    pub first_status: String,
    /// Every reply the FOC received for the flight, as `KIND:STATUS`.
    pub statuses: Vec<String>,
    /// Fuel of the first stage-1 / ideal / constrained plan of the primary objective.
    pub fuel_by_stage_kg: BTreeMap<Provenance, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreed_fuel_kg: Option<f64>,
    pub replans: u32,
    pub revisions_sent: u32,
    pub revisions_accepted: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escalation: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifacts {
    pub event_log: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub latency_csv: Option<PathBuf>,
    pub status_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario_id: String,
    pub seed: u64,
    pub flights: Vec<FlightSummary>,
    pub status_distribution: Vec<StatusRow>,
    pub latency: Vec<LatencyRow>,
    pub artifacts: Artifacts,
}

/// Reply statuses per flight, in delivery order.
fn statuses_by_flight(log: &EventLog) -> BTreeMap<Gufi, Vec<String>> {
    let mut out: BTreeMap<Gufi, Vec<String>> = BTreeMap::new();
    for m in log.messages().filter(|m| m.receiver == FOC) {
        if let Some(r) = m.payload.reply() {
            out.entry(m.gufi.clone())
                .or_default()
                .push(format!("{}:{}", m.kind().name(), r.status().name()));
        }
    }
    out
}

pub fn flight_summary(f: &FlightState, statuses: Vec<String>) -> FlightSummary {
    let primary = f.spec.objectives[0];
    let mut fuel_by_stage_kg = BTreeMap::new();
    for c in f.candidates.iter().filter(|c| c.objective == primary) {
        if matches!(
            c.provenance,
            Provenance::Stage1 | Provenance::Stage2Ideal | Provenance::Stage2Constrained
        ) {
            fuel_by_stage_kg.entry(c.provenance).or_insert(c.trajectory.total_fuel());
        }
    }
    FlightSummary {
        gufi: f.gufi.clone(),
        origin: f.spec.origin.clone(),
        destination: f.spec.destination.clone(),
        final_state: f.state(),
        first_status: f.first_outcome.clone().unwrap_or_else(|| "n/a".into()),
        statuses,
        fuel_by_stage_kg,
        agreed_fuel_kg: f.lifecycle.agreed.as_ref().map(|t| t.total_fuel()),
        replans: f.replans,
        revisions_sent: f.revisions_sent,
        revisions_accepted: f.revisions_accepted,
        escalation: f.escalation.clone(),
    }
}

impl RunReport {
    /// Summary of the simulation in its current state.
    pub fn from_sim(sim: &Simulation) -> Self {
        let mut statuses = statuses_by_flight(sim.log());
        let flights: Vec<FlightSummary> = sim
            .flights()
            .iter()
            .map(|f| flight_summary(f, statuses.remove(&f.gufi).unwrap_or_default()))
            .collect();
        let labels: Vec<String> = flights.iter().map(|f| f.first_status.clone()).collect();
        RunReport {
            scenario_id: sim.scenario().id.clone(),
            seed: sim.seed(),
            status_distribution: status_rows(&labels, &STATUS_ORDER),
            latency: latency_stats(sim.log()),
            flights,
            artifacts: Artifacts::default(),
        }
    }
}

/// Write `events.log`, `latency.csv`, `status.csv` and `report.json` into
/// `out_dir` (created if missing) and return the report.
pub fn write_artifacts(sim: &Simulation, out_dir: &Path) -> std::io::Result<RunReport> {
    std::fs::create_dir_all(out_dir)?;
    let mut report = RunReport::from_sim(sim);
    let paths = Artifacts {
        event_log: Some(out_dir.join("events.log")),
        report: Some(out_dir.join("report.json")),
        latency_csv: Some(out_dir.join("latency.csv")),
        status_csv: Some(out_dir.join("status.csv")),
    };
    let open = |p: &Option<PathBuf>| File::create(p.as_ref().expect("set above")).map(BufWriter::new);
    let mut w = open(&paths.event_log)?;
    w.write_all(sim.log().to_text().as_bytes())?;
    w.flush()?;
    write_csv(&report.latency, open(&paths.latency_csv)?).map_err(std::io::Error::other)?;
    write_csv(&report.status_distribution, open(&paths.status_csv)?).map_err(std::io::Error::other)?;
    report.artifacts = paths;
    let mut w = open(&report.artifacts.report)?;
    serde_json::to_writer_pretty(&mut w, &report).map_err(std::io::Error::other)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{bundled_path, load_scenario};

    fn minimal() -> Simulation {
        let mut sim = Simulation::new(load_scenario(bundled_path("minimal")).unwrap(), 1).unwrap();
        sim.run_to_end().unwrap();
        sim
    }

    #[test]
    fn artifacts_written_and_reproducible() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ra = write_artifacts(&minimal(), a.path()).unwrap();
        let rb = write_artifacts(&minimal(), b.path()).unwrap();
        assert_eq!(ra.flights.len(), 1);
        assert_eq!(ra.flights[0].final_state, LifecycleState::Completed);
        assert_eq!(
            RunReport { artifacts: Artifacts::default(), ..ra.clone() },
            RunReport { artifacts: Artifacts::default(), ..rb }
        );
        for p in [&ra.artifacts.event_log, &ra.artifacts.latency_csv, &ra.artifacts.status_csv, &ra.artifacts.report] {
            assert!(p.as_ref().unwrap().exists());
        }
        let status = std::fs::read_to_string(ra.artifacts.status_csv.unwrap()).unwrap();
        assert_eq!(status, "status,count,pct\nCONCUR,1,100.0\n");
        let log = std::fs::read_to_string(ra.artifacts.event_log.unwrap()).unwrap();
        assert_eq!(EventLog::parse(&log).unwrap().to_text(), log);
    }
}
