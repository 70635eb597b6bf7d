use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ledger-sim"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn run_file(text: &str, extra: &[&str]) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.toml");
    std::fs::write(&path, text).unwrap();
    let out = bin()
        .arg("--scenario")
        .arg(&path)
        .args(["--out", "-", "--quiet"])
        .args(extra)
        .output()
        .unwrap();
    (out, dir)
}

#[test]
fn bundled_scenarios_exit_as_expected() {
    for (name, code) in [
        ("bitcoin.toml", 0),
        ("lyapunov.toml", 0),
        ("partition.toml", 0),
        ("sabotage.toml", 1),
    ] {
        let out = bin()
            .arg("--scenario")
            .arg(scenario(name))
            .args(["--out", "-", "--quiet"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(code), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn sabotage_reports_a_json_counterexample() {
    let out = bin()
        .arg("--scenario")
        .arg(scenario("sabotage.toml"))
        .args(["--out", "-", "--quiet"])
        .output()
        .unwrap();
    let line = String::from_utf8(out.stderr).unwrap();
    let report: serde_json::Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert_eq!(report["verdict"]["verdict"], "counterexample");
    assert_eq!(report["check"], "positivity");
}

#[test]
fn reruns_are_byte_identical() {
    let go = |format: &str| {
        bin()
            .arg("--scenario")
            .arg(scenario("bitcoin.toml"))
            .args(["--out", "-", "--quiet", "--format", format, "--seed", "42"])
            .output()
            .unwrap()
            .stdout
    };
    for format in ["csv", "jsonl"] {
        let a = go(format);
        assert!(!a.is_empty());
        assert_eq!(a, go(format));
    }
}

#[test]
fn zero_horizon_is_rejected() {
    let (out, _dir) = run_file("horizon = 0\n", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn negative_horizon_names_field_and_line() {
    let (out, _dir) = run_file("seed = 1\n\nhorizon = -5\n", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("horizon"), "{err}");
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn unknown_check_is_a_load_error() {
    let (out, _dir) = run_file("horizon = 2\n", &["--check", "no-such-check"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_rows_match_the_horizon() {
    let (out, _dir) = run_file("horizon = 12\n[agents]\ncount = 2\n", &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 13);
    assert!(rows[1].starts_with("1,5000000000,"));
}
