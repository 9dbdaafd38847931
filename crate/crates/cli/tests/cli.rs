use std::path::Path;
use std::process::{Command, Output};

fn entroflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_entroflow")).args(args).env_remove("ENTROFLOW_TOL").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn lambda1_gaussian_is_one() {
    let o = entroflow(&["lambda1", "--p", "1.5", "--potential", "gaussian", "--domain", "-8:8", "--n", "2001"]);
    assert_eq!(code(&o), 0);
    let l: f64 = stdout(&o).trim().parse().unwrap();
    assert!((l - 1.0).abs() < 1e-3);
}

#[test]
fn lambda1_power_positive_and_flat_zero() {
    let o = entroflow(&["lambda1", "--potential", "power:1.5", "--p", "1.01"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).trim().parse::<f64>().unwrap() > 0.0);
    let o = entroflow(&["lambda1", "--potential", "flat", "--domain", "0:1", "--p", "1.5"]);
    assert_eq!(stdout(&o).trim(), "0.000000000000");
}

#[test]
fn lambda1_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let j = path(dir.path(), "l.json");
    let o = entroflow(&["lambda1", "--theta", "0.5", "--n", "401", "--output", &j]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&j).unwrap()).unwrap();
    assert_eq!(v["result"]["eigenvector"].as_array().unwrap().len(), 401);
    let c = path(dir.path(), "l.csv");
    entroflow(&["lambda1", "--p", "2", "--n", "401", "--out", "csv", "--output", &c]);
    let text = std::fs::read_to_string(&c).unwrap();
    assert!(text.starts_with("# lambda1:"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 402);
}

#[test]
fn config_errors_exit_2() {
    assert_eq!(code(&entroflow(&["lambda1", "--p", "1.5", "--potential", "quartic"])), 2);
    assert_eq!(code(&entroflow(&["lambda1", "--p", "3"])), 2);
    assert_eq!(code(&entroflow(&["lambda1"])), 2);
    assert_eq!(code(&entroflow(&["lambda1", "--p", "1.5", "--domain", "1:1"])), 2);
    assert_eq!(code(&entroflow(&["flow", "linear"])), 2);
}

#[test]
fn sweep_is_independent_of_job_count() {
    let a = entroflow(&["lambda1", "--p-sweep", "1.1:2:6", "--n", "301", "--jobs", "1"]);
    let b = entroflow(&["lambda1", "--p-sweep", "1.1:2:6", "--n", "301", "--jobs", "3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(stdout(&a).lines().count(), 6);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "c.json");
    std::fs::write(&cfg, r#"{"potential": "flat", "domain": "0:1", "n": 201, "p": 1.5}"#).unwrap();
    let o = entroflow(&["lambda1", "--config", &cfg]);
    assert_eq!(stdout(&o).trim(), "0.000000000000");
    let o = entroflow(&["lambda1", "--config", &cfg, "--potential", "gaussian", "--domain", "-8:8"]);
    assert!((stdout(&o).trim().parse::<f64>().unwrap() - 1.0).abs() < 1e-3);
    std::fs::write(&cfg, r#"{"potentail": "flat"}"#).unwrap();
    assert_eq!(code(&entroflow(&["lambda1", "--config", &cfg, "--p", "2"])), 2);
}

#[test]
fn region_membership_and_exit_codes() {
    let o = entroflow(&["region", "--m", "1.2", "--p", "1.5", "--theta", "0.5", "--samples", "500"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["membership"][0]["in_ellipse"], true);
    let o = entroflow(&["region", "--m", "2", "--p", "2", "--theta", "0.5", "--samples", "500"]);
    assert_eq!(code(&o), 4);
    assert_eq!(json(&o)["membership"][0]["in_ellipse"], false);
    let o = entroflow(&["region", "--from-p", "1.5", "--samples", "500"]);
    let theta = json(&o)["reports"][0]["theta"].as_f64().unwrap();
    assert!((theta - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(json(&o)["seed"], 0);
}

#[test]
fn region_jobs_do_not_change_output() {
    let a = entroflow(&["region", "--theta", "0.25,0.5,1", "--samples", "2000", "--seed", "9", "--jobs", "1"]);
    let b = entroflow(&["region", "--theta", "0.25,0.5,1", "--samples", "2000", "--seed", "9", "--jobs", "3"]);
    assert_eq!(stdout(&a), stdout(&b));
}

#[test]
fn constants_report_hypotheses() {
    let o = entroflow(&["constants", "--m", "1.2", "--p", "1.5", "--theta", "0.5", "--n", "801"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["all_hold"], true);
    assert!(v["constants"]["kappa"].as_f64().unwrap() > 0.0);
    let o = entroflow(&["constants", "--m", "2", "--p", "2", "--theta", "0.5", "--lambda1", "1", "--e0", "0"]);
    assert_eq!(code(&o), 4);
    assert_eq!(json(&o)["hypotheses"]["in_ellipse"], false);
    let o = entroflow(&["constants", "--m", "1.2", "--p", "1.5", "--theta", "0.5", "--lambda1", "-1", "--e0", "0"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn flow_is_deterministic_and_reports_pass() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (path(dir.path(), "a.csv"), path(dir.path(), "b.csv"));
    let args = |t: &str| vec!["flow", "linear", "--p", "1.5", "--tend", "1", "--n", "801", "--trace"].into_iter().chain([t]).map(String::from).collect::<Vec<_>>();
    let o = Command::new(env!("CARGO_BIN_EXE_entroflow")).args(args(&a)).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("linear p=1.5: t=1 E="));
    Command::new(env!("CARGO_BIN_EXE_entroflow")).args(args(&b)).output().unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let svg = path(dir.path(), "plot.svg");
    let o = entroflow(&["report", "--trace", &a, "--plot", &svg]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let verdicts = json(&o);
    assert!(verdicts.as_array().unwrap().iter().all(|v| v["pass"] == true));
    let text = std::fs::read_to_string(&svg).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count() >= 2);
}

#[test]
fn corrupted_trace_fails_report() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.csv");
    assert_eq!(code(&entroflow(&["flow", "linear", "--p", "2", "--tend", "1", "--n", "801", "--trace", &a])), 0);
    let text = std::fs::read_to_string(&a).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let row = lines.iter().position(|l| l.starts_with("t,")).unwrap() + 50;
    let mut cols: Vec<String> = lines[row].split(',').map(String::from).collect();
    cols[1] = format!("{:e}", cols[1].parse::<f64>().unwrap() * 10.0);
    lines[row] = cols.join(",");
    std::fs::write(&a, lines.join("\n")).unwrap();
    let o = entroflow(&["report", "--trace", &a, "--checks", "envelope,dissipation"]);
    assert!(code(&o) > 4);
    assert!(json(&o).as_array().unwrap().iter().any(|v| v["pass"] == false));
}

#[test]
fn report_rejects_a_different_grid() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.csv");
    entroflow(&["flow", "pme", "--m", "1.2", "--p", "1.5", "--tend", "0.5", "--n", "401", "--trace", &a]);
    assert_eq!(code(&entroflow(&["report", "--trace", &a])), 0);
    assert_eq!(code(&entroflow(&["report", "--trace", &a, "--n", "402"])), 2);
    assert_eq!(code(&entroflow(&["report", "--trace", &a, "--checks", "poincare"])), 2);
}

#[test]
fn tolerance_env_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.csv");
    entroflow(&["flow", "linear", "--p", "1.5", "--tend", "0.5", "--n", "401", "--trace", &a]);
    let o = Command::new(env!("CARGO_BIN_EXE_entroflow"))
        .args(["report", "--trace", &a])
        .env("ENTROFLOW_TOL", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
