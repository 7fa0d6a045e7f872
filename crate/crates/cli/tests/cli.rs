use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn zharm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zharm"))
        .args(args)
        .current_dir(dir)
        .env_remove("ZHARM_THREADS")
        .output()
        .unwrap()
}

fn summary(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stdout);
    let line = text.lines().last().expect("summary line");
    serde_json::from_str(line).unwrap()
}

fn write_packet(dir: &Path) {
    let f = zharm_core::family::packet(1.0, 64);
    std::fs::write(dir.join("f.json"), serde_json::to_string(&f.to_json()).unwrap()).unwrap();
}

#[test]
fn kernel_routes_agree_and_write_csv() {
    let d = tempfile::tempdir().unwrap();
    let o = zharm(d.path(), &["kernel", "--t", "1.5", "--nmax", "12", "--route", "both", "--out", "k.csv"]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(&o);
    assert_eq!(s["command"], "kernel");
    assert_eq!(s["status"], "ok");
    let csv = std::fs::read_to_string(d.path().join("k.csv")).unwrap();
    assert!(csv.starts_with("n,bessel,quadrature,abs_diff"));
    assert_eq!(csv.lines().count(), 1 + 25);
}

#[test]
fn validation_errors_exit_2() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(zharm(d.path(), &["kernel", "--bogus"]).status.code(), Some(2));
    assert_eq!(zharm(d.path(), &["--grid", "1000", "kernel", "--t", "1"]).status.code(), Some(2));
    assert_eq!(zharm(d.path(), &["norm", "--space", "nope", "--in", "x.json"]).status.code(), Some(2));
    let o = zharm(d.path(), &["apply", "--symbol", "heat:1", "--in", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(summary(&o)["status"], "error");
}

#[test]
fn riesz_disagreement_beyond_tolerance_exits_3() {
    let d = tempfile::tempdir().unwrap();
    write_packet(d.path());
    let ok = zharm(d.path(), &["riesz", "--route", "both", "--in", "f.json"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(summary(&ok)["discrepancy"].as_f64().unwrap() < 1e-6);
    let strict = zharm(d.path(), &["riesz", "--route", "both", "--tol", "1e-30", "--in", "f.json"]);
    assert_eq!(strict.status.code(), Some(3));
}

#[test]
fn decompose_then_verify() {
    let d = tempfile::tempdir().unwrap();
    write_packet(d.path());
    let o = zharm(d.path(), &["decompose", "--in", "f.json", "--out", "c.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = zharm(d.path(), &["verify", "--in", "c.json", "--flavor", "besov", "--out", "v.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = std::fs::read_to_string(d.path().join("v.csv")).unwrap().lines().count();
    assert!(rows > 1);
}

#[test]
fn apply_and_norm_round_trip() {
    let d = tempfile::tempdir().unwrap();
    write_packet(d.path());
    let o = zharm(d.path(), &["apply", "--symbol", "heat:0.5", "--in", "f.json", "--out", "g.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = zharm(d.path(), &["norm", "--space", "besov", "--alpha", "0", "--p", "2", "--q", "2", "--in", "g.json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(summary(&o)["value"].as_f64().unwrap() > 0.0);
}

#[test]
fn multiplier_condition_is_finite() {
    let d = tempfile::tempdir().unwrap();
    let o = zharm(d.path(), &["multiplier", "--symbol", "imagpower:2", "--check-condition", "--s", "1.0", "--r", "inf"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(&o);
    assert!(s.to_string().contains("sup"));
}
