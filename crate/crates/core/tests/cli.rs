use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn saddleflow(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saddleflow"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout))
    })
}

const LP1: &str = r#"{"name": "LP-1", "A": [[1, 1]], "b": [1], "c": [1, 2]}"#;

#[test]
fn solve_writes_metrics_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "lp.json", LP1);
    let out = saddleflow(&["solve", "lp.json", "--dt", "0.01", "--tmax", "100", "--tol", "1e-6", "--out", "run"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = stdout_json(&out);
    for key in ["terminal_kkt", "terminal_value_gap", "time_to_tol", "steps", "perturbed_kkt"] {
        assert!(metrics.get(key).is_some(), "missing {key}");
    }
    assert!(metrics["terminal_kkt"].as_f64().unwrap() <= 1e-6);
    assert!(metrics["perturbed_kkt"].is_null());
    let on_disk: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("run/metrics.json")).unwrap()).unwrap();
    assert_eq!(on_disk, metrics);
    let csv = fs::read_to_string(dir.path().join("run/trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,x_1,x_2,z_1,V,kkt\n"));
}

#[test]
fn solve_oracle_prints_solution() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "lp.json", LP1);
    let out = saddleflow(&["solve", "lp.json", "--oracle"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let sol = stdout_json(&out);
    assert_eq!(sol["x_star"], serde_json::json!([1.0, 0.0]));
    assert_eq!(sol["z_star"], serde_json::json!([-1.0]));
    assert_eq!(sol["optimal_value"], serde_json::json!(1.0));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write(p, "ragged.json", r#"{"A": [[1, 1], [1]], "b": [1, 1], "c": [1, 2]}"#);
    write(p, "infeasible.json", r#"{"A": [[1, 1]], "b": [-1], "c": [1, 1]}"#);
    write(p, "unbounded.json", r#"{"A": [[1, -1]], "b": [0], "c": [-1, 0]}"#);
    write(p, "stiff.json", r#"{"A": [[100, -100]], "b": [1], "c": [0, 0]}"#);
    write(p, "lp1.json", LP1);
    let code = |args: &[&str]| saddleflow(args, p).status.code();
    assert_eq!(code(&["solve", "ragged.json"]), Some(2));
    assert_eq!(code(&["solve", "missing.json"]), Some(2));
    assert_eq!(code(&["solve", "lp1.json", "--dt", "0.5"]), Some(2));
    assert_eq!(code(&["solve", "infeasible.json"]), Some(4));
    assert_eq!(code(&["solve", "unbounded.json", "--oracle"]), Some(4));
    assert_eq!(code(&["solve", "stiff.json", "--dt", "0.1", "--tmax", "100"]), Some(3));
    assert_eq!(code(&["noiss", "lp1.json"]), Some(2));
    assert_eq!(code(&["frobnicate"]), Some(2));
}

#[test]
fn simulate_constant_disturbance() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "lp.json", LP1);
    write(
        dir.path(),
        "scenario.json",
        r#"{
            "lp": "lp.json",
            "integrator": {"dt": 0.01, "t_max": 200, "stop_tol": 1e-6},
            "disturbance": {"kind": "constant", "params": {"w_x": [0.1, 0.0], "w_z": [0.1]}},
            "initial": {"kind": "random", "seed": 3}
        }"#,
    );
    let out = saddleflow(&["simulate", "scenario.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = stdout_json(&out);
    assert!(metrics["perturbed_kkt"].as_f64().unwrap() <= 1e-3);
}

#[test]
fn rcg_scenario_writes_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "scenario.json",
        &format!(
            r#"{{
                "lp": {LP1},
                "integrator": {{"dt": 0.01, "t_max": 100, "stop_tol": 0, "record_every": 10}},
                "graph": {{"n": 2, "edges": [[1, 2]]}},
                "schedule": {{"breakpoints": [0, 4, 5, 9, 10, 14], "fail_all": true}},
                "output": {{"dir": "out"}}
            }}"#
        ),
    );
    let out = saddleflow(&["rcg", "scenario.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let checkpoints: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/checkpoints.json")).unwrap()).unwrap();
    let times: Vec<f64> = checkpoints
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["time"].as_f64().unwrap())
        .collect();
    assert_eq!(times, vec![0.0, 5.0, 10.0]);

    write(dir.path(), "plain.json", &format!(r#"{{"lp": {LP1}}}"#));
    assert_eq!(saddleflow(&["rcg", "plain.json"], dir.path()).status.code(), Some(2));
    write(
        dir.path(),
        "disconnected.json",
        &format!(r#"{{"lp": {LP1}, "graph": {{"n": 2, "edges": []}}, "schedule": {{"breakpoints": [0, 1], "fail_all": true}}}}"#),
    );
    let out = saddleflow(&["rcg", "disconnected.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("violates (D3)"));
}

#[test]
fn optctrl_scalar_example() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "spec.json", r#"{"G": [[2]], "H_diag": [2], "x0": [1], "T": 0}"#);
    let out = saddleflow(&["optctrl", "spec.json", "--out", "oc"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["optimal_value"], serde_json::json!(1.0));
    assert_eq!(summary["controls"], serde_json::json!([[-1.0]]));
    assert_eq!(summary["states"], serde_json::json!([[0.0]]));
    let controls = fs::read_to_string(dir.path().join("oc/controls.csv")).unwrap();
    assert_eq!(controls, "tau,u_1\n0,-1.0000000000000000e0\n");
}

#[test]
fn noiss_certificate() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ray.json", r#"{"A": [[1, -1]], "b": [0], "c": [1, 0]}"#);
    let out = saddleflow(&["noiss", "ray.json", "--out", "cert.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let cert = stdout_json(&out);
    assert_eq!(cert["w_bar"]["w_x"], serde_json::json!([0.0, 1.0]));
    assert_eq!(cert["certificate"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("cert.json").exists());
}
