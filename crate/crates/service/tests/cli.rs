//! Exit codes and artifacts of the batch and validation commands.

use std::path::{Path, PathBuf};

use tbo_foc::scenario::bundled_path;
use tbo_service::cli::{cmd_run, cmd_validate, EXIT_DEADLOCK, EXIT_NEGOTIATE, EXIT_NON_CONCUR, EXIT_OK, EXIT_SCENARIO};

fn plan(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("plans").join(format!("{name}.json"))
}

fn run(scenario: &Path, out: &Path) -> (i32, String, String) {
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let code = cmd_run(scenario, 1, out, &mut o, &mut e);
    (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
}

fn validate(name: &str) -> (i32, String, String) {
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let code = cmd_validate(&plan(name), &bundled_path("fig5-corpus"), &mut o, &mut e);
    (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
}

#[test]
fn run_minimal() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = run(&bundled_path("minimal"), dir.path());
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("1 flights"), "{out}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["flights"][0]["final_state"], "COMPLETED");
    for f in ["events.log", "latency.csv", "status.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn run_corpus_status_totals() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&bundled_path("fig5-corpus"), dir.path());
    assert_eq!(code, EXIT_OK, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("status.csv")).unwrap();
    assert_eq!(
        csv,
        "status,count,pct\nCONCUR,9,31.03\nNEGOTIATE,14,48.28\nNON_CONCUR,4,13.79\nn/a,2,6.9\n"
    );
}

#[test]
fn run_rejects_bad_scenarios() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"id": "x", "airspace": 3}"#).unwrap();
    let (code, _, err) = run(&bad, &dir.path().join("out"));
    assert_eq!(code, EXIT_SCENARIO);
    assert!(err.starts_with("error: "), "{err}");
    assert!(!dir.path().join("out").exists());

    let (code, _, err) = run(&dir.path().join("missing.json"), &dir.path().join("out"));
    assert_eq!(code, EXIT_SCENARIO);
    assert!(err.contains("missing.json"), "{err}");
    assert_ne!(EXIT_DEADLOCK, EXIT_SCENARIO);
}

#[test]
fn validate_exit_codes() {
    let (code, out, err) = validate("concur");
    assert_eq!(code, EXIT_OK, "{out}{err}");
    assert!(out.contains("CONCUR"));

    let (code, out, _) = validate("negotiate");
    assert_eq!(code, EXIT_NEGOTIATE, "{out}");
    assert!(out.contains("CAP-EGLL") && out.contains("FL310"), "{out}");

    let (code, out, _) = validate("r2b");
    assert_eq!(code, EXIT_NON_CONCUR, "{out}");
    assert!(out.contains("R2           FAIL"), "{out}");
    assert!(out.contains("VERAX"), "the message names the waypoint: {out}");

    let (code, out, err) = validate("malformed");
    assert_eq!(code, EXIT_SCENARIO);
    assert!(out.is_empty());
    assert!(err.starts_with("n/a: cannot parse plan"), "{err}");
}
