use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn qme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qme"))
        .args(args)
        .env_remove("QME_OUT_DIR")
        .output()
        .expect("spawn qme")
}

fn run_to(dir: &Path, scenario: &str, extra: &[&str]) -> Output {
    let mut args = vec!["run", scenario, "--quiet", "--out-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    qme(&args)
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn column(dir: &Path, file: &str, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(dir.join(file)).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn appendix_d_reaches_negative_limit() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(dir.path(), "appendix_d.json", &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    let min = s["min_eig_final"].as_f64().unwrap();
    assert!((min + 0.19045).abs() <= 1e-4, "{min}");
    assert!(!s["violations"].as_array().unwrap().is_empty());
}

#[test]
fn two_state_fermion_matches_analytic_occupation() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(dir.path(), "two_state_fermion.json", &[]);
    assert_eq!(out.status.code(), Some(0));
    let t = column(dir.path(), "states.csv", "t");
    let n_f = column(dir.path(), "states.csv", "re_2_2");
    for (t, n) in t.iter().zip(&n_f) {
        assert!((n - (1.0 - 1.0 / (1.0 + t))).abs() <= 1e-6, "t = {t}: {n}");
    }
    assert!((t.last().unwrap() - 3.0).abs() < 1e-15);
    let duality = column(dir.path(), "diagnostics.csv", "duality_residual");
    assert!(duality.iter().all(|&r| r <= 1e-10));
}

#[test]
fn homogeneous_chain_matches_quasiclassical() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(dir.path(), "homogeneous_chain.json", &["--override", "dt=1e-4"]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path());
    let mismatch = s["cross_check"]["max_diagonal_mismatch"].as_f64().unwrap();
    assert!(mismatch <= 1e-8, "{mismatch}");
    assert_eq!(s["steps"].as_u64(), Some(20_000));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = run_to(dir.path(), "generalized_jumps_fermion", &["--override", "t1=1.0"]);
        assert_eq!(out.status.code(), Some(0));
    }
    for file in ["states.csv", "diagnostics.csv"] {
        assert_eq!(
            fs::read(a.path().join(file)).unwrap(),
            fs::read(b.path().join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn csv_values_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    run_to(dir.path(), "two_state_boson", &[]);
    let text = fs::read_to_string(dir.path().join("states.csv")).unwrap();
    let field = text.lines().nth(5).unwrap().split(',').nth(7).unwrap();
    let x: f64 = field.parse().unwrap();
    assert_eq!(format!("{x:.16e}"), field);
}

#[test]
fn unexpected_violations_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_to(
        dir.path(),
        "dephasing_crossing",
        &["--override", "checks.expect_violations=false", "--override", "t1=2"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(summary(dir.path())["unexpected_violations"].as_bool().unwrap());
}

#[test]
fn negative_rate_is_an_error_naming_the_entry() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let mut doc: Value = serde_json::from_str(
        &String::from_utf8(qme(&["show", "two_state_fermion"]).stdout).unwrap(),
    )
    .unwrap();
    doc["rates"][0]["w"] = Value::from(-1.0);
    fs::write(&path, doc.to_string()).unwrap();
    let out = run_to(&dir.path().join("out"), path.to_str().unwrap(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("rates[(2,1)]"), "{stderr}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn divergence_reports_the_failing_time() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("blowup.json");
    fs::write(
        &path,
        r#"{"name": "blowup", "equation": "general", "statistics": "boson", "dimension": 1,
            "initial": {"diagonal": [0.0]}, "hamiltonian": "zero",
            "a_p": {"re": [[0.0]]}, "a_pbar": {"re": [[-500.0]]},
            "integrator": {"t1": 2.0, "dt": 0.001}}"#,
    )
    .unwrap();
    let out = run_to(&dir.path().join("out"), path.to_str().unwrap(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("diverged at t ="), "{stderr}");
}

#[test]
fn missing_file_is_an_error() {
    let out = qme(&["run", "/nonexistent/scenario.json", "--quiet"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn out_dir_defaults_to_env_root() {
    let root = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qme"))
        .args(["run", "two_state_boson", "--quiet", "--override", "t1=0.1"])
        .env("QME_OUT_DIR", root.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(root.path().join("two_state_boson").join("summary.json").exists());
}

#[test]
fn list_names_bundled_scenarios() {
    let out = qme(&["list"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["appendix_d", "two_state_fermion", "homogeneous_chain", "fock_closure_2mode"] {
        assert!(text.lines().any(|l| l == name), "{name}");
    }
}
