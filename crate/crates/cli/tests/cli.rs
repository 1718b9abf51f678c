use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ehrhard")).current_dir(dir).args(args).output().expect("binary runs")
}

fn report(dir: &Path, out: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(out).join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn gaussian_half_plane_perimeter() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "gauss-iso.json", r#"{"kind": "isotropic_gaussian", "dim": 2}"#);
    let o = run(t.path(), &["perimeter", "--density", "gauss-iso.json", "--set", "halfspace:e1:0", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(t.path(), "o");
    let v = r["result"]["value"].as_f64().unwrap();
    assert!((v - 0.398942).abs() < 1e-6, "{v}");
    // The report embeds the resolved config, including the density spec.
    assert_eq!(r["config"]["command"], "perimeter");
    assert_eq!(r["config"]["density"]["kind"], "isotropic_gaussian");
    assert_eq!(r["config"]["set"], "halfspace:e1:0");
    assert!(t.path().join("o/timing.json").exists());
}

#[test]
fn logistic_ps_test_passes() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "logistic.json", r#"{"kind": "logistic_product", "dim": 1}"#);
    let o = run(t.path(), &["ps-test", "--density", "logistic.json", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(t.path(), "o");
    let axis = &r["result"]["axes"][0];
    assert_eq!(axis["symmetry"]["verdict"], "PASS");
    assert_eq!(axis["subadditivity"]["verdict"], "PASS");
}

#[test]
fn empty_config_reports_missing_density() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "empty.json", "{}");
    let o = run(t.path(), &["perimeter", "--config", "empty.json"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(err["error"]["message"], "missing density");
}

#[test]
fn usage_errors_exit_one_with_json() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), &["no-such-command"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(err["error"]["kind"], "Usage");
    write(t.path(), "g.json", r#"{"kind": "isotropic_gaussian", "dim": 2}"#);
    let o = run(t.path(), &["perimeter", "--density", "g.json", "--set", "ball:0,0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_and_flags_merge() {
    let t = tempfile::tempdir().unwrap();
    write(
        t.path(),
        "cfg.json",
        r#"{"density": {"kind": "isotropic_gaussian", "dim": 2}, "set": "ball:0,0:1", "res": 64, "seed": 7}"#,
    );
    let o = run(t.path(), &["measure", "--config", "cfg.json", "--dir", "0,1", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(t.path(), "o");
    assert_eq!(r["config"]["res"], 64);
    assert_eq!(r["config"]["seed"], 7);
    assert_eq!(r["config"]["dir"], serde_json::json!([0.0, 1.0]));
    // The equal-mass half-space carries the same mass as the set.
    let h = &r["result"]["equal_mass_half_space"];
    assert_eq!(h["v"], serde_json::json!([0.0, 1.0]));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "aniso.json", r#"{"kind": "anisotropic_gaussian", "params": {"rates": [1, 4]}, "dim": 2}"#);
    let args = |out: &'static str| {
        vec!["symmetrize", "--density", "aniso.json", "--set", "ball:0.5,0:0.7+box:-1,-1:0,0", "--dir", "1,2", "--res", "192", "--seed", "3", "--out", out]
    };
    assert_eq!(run(t.path(), &args("a")).status.code(), Some(0));
    assert_eq!(run(t.path(), &args("b")).status.code(), Some(0));
    let a = std::fs::read(t.path().join("a/report.json")).unwrap();
    let b = std::fs::read(t.path().join("b/report.json")).unwrap();
    assert_eq!(a, b);
    let sa = std::fs::read(t.path().join("a/symmetrized.ehis")).unwrap();
    let sb = std::fs::read(t.path().join("b/symmetrized.ehis")).unwrap();
    assert_eq!(&sa[..4], b"EHIS");
    assert_eq!(sa, sb);
}

#[test]
fn flow_writes_trace_csv() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "g.json", r#"{"kind": "isotropic_gaussian", "dim": 2}"#);
    let o = run(
        t.path(),
        &["flow", "--density", "g.json", "--set", "halfspace:e1:0-ball:1,0:0.4+ball:-1,0.5:0.3", "--dir", "1,0", "--res", "96", "--steps", "5", "--out", "o"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(t.path().join("o/trace.csv")).unwrap();
    assert!(csv.starts_with("step,"));
    assert!(csv.lines().count() >= 2);
}

#[test]
fn anisotropic_search_exits_two_with_replay_set() {
    let t = tempfile::tempdir().unwrap();
    write(t.path(), "aniso.json", r#"{"kind": "anisotropic_gaussian", "params": {"rates": [1, 4]}, "dim": 2}"#);
    let o = run(t.path(), &["search", "--density", "aniso.json", "--res", "192", "--out", "o"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(t.path(), "o");
    assert_eq!(r["result"]["report"]["status"], "found");
    assert!(t.path().join("o/violation.ehis").exists());
}
