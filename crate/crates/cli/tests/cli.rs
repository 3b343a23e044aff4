use std::path::PathBuf;
use std::process::Command;

fn profilr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_profilr"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

#[test]
fn run_prints_publications_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.jsonl");
    let out = profilr()
        .args(["run", scenario("wormhole.json").to_str().unwrap(), "--seed", "3", "--trace", trace.to_str().unwrap()])
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout.contains("venue=7 cycle=0 dim=safety range=[0,0.5) count=1"), "{stdout}");
    assert!(stdout.contains("user=far venue=7 rejected=timing_violation"), "{stdout}");
    let lines = std::fs::read_to_string(&trace).unwrap();
    assert!(lines.lines().count() > 10);
    for line in lines.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
}

#[test]
fn run_is_deterministic_per_seed() {
    let path = scenario("adversarial.json");
    let once = || profilr().args(["run", path.to_str().unwrap(), "--seed", "9", "--json"]).output().unwrap();
    let (a, b) = (once(), once());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let summary: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(summary["oracle_mismatches"], serde_json::json!([]));
}

#[test]
fn bad_scenario_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"name": "x", "params": {"k": 0}}"#).unwrap();
    let out = profilr().args(["run", path.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = profilr().args(["run", dir.path().join("missing.json").to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn accounting_csv() {
    let out = profilr().args(["bench", "accounting", "--sweep", "256,1024", "--format", "csv"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("suite,point,metric,value,unit"));
    // 3 record widths x 2 sizes x 5 metrics
    assert_eq!(lines.count(), 30, "{text}");
}

#[test]
fn single_criterion() {
    let out = profilr().args(["test-suite", "--only", "6"]).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.starts_with("PASS  6 wormhole-detection"), "{stdout}");
    let out = profilr().args(["test-suite", "--only", "42"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
