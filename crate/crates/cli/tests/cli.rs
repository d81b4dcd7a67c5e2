use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use stirap::scenario::{AnalysisReport, RunReport};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stirap"))
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> PathBuf {
    root().join("scenarios").join(format!("{name}.toml"))
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn validate(schema: &str, doc: &Value) {
    let schema: Value = read_json(&root().join("schema").join(schema));
    let validator = jsonschema::draft202012::new(&schema).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn analyze(name: &str) -> Value {
    let out = exec(&["analyze", scenario(name).to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    validate("analysis.schema.json", &v);
    v
}

#[test]
fn analyze_verdicts() {
    let v = analyze("fig4");
    assert_eq!(v["report"]["verdict"], "complete_any_initial");
    let v = analyze("fig1");
    assert_eq!(v["report"]["verdict"], "complete_any_initial");
    assert_eq!(v["report"]["subsystems"].as_array().unwrap().len(), 2);
    let v = analyze("fig2");
    assert_eq!(v["report"]["verdict"], "partial");
    assert_eq!(v["report"]["feasibility"]["uncoupled_g_count"], 2);
    assert_eq!(analyze("fig10")["report"]["verdict"], "conditional: condition satisfied");
    assert_eq!(analyze("fig9")["report"]["verdict"], "conditional: condition violated");
}

#[test]
fn run_fig4_and_fig8() {
    let dir = tempfile::tempdir().unwrap();
    let out4 = dir.path().join("fig4");
    let o = exec(&["run", scenario("fig4").to_str().unwrap(), "--out", out4.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(&out4.join("report.json"));
    validate("report.schema.json", &rep);
    validate("trajectory.schema.json", &read_json(&out4.join("trajectory.json")));
    let p: Vec<f64> = rep["report"]["final_populations"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(p[0] + p[1] < 1e-3 && p[2] > 0.999, "{p:?}");
    assert!(out4.join("trajectory.csv").exists() && out4.join("adiabaticity.csv").exists());

    let o = exec(&["run", scenario("fig8").to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    validate("report.schema.json", &rep);
    let pg = rep["report"]["final_populations"][0].as_f64().unwrap();
    assert!(pg > 0.05, "residual P_g = {pg}");
}

#[test]
fn csv_has_seventeen_digits() {
    let dir = tempfile::tempdir().unwrap();
    let o = exec(&["run", scenario("fig8").to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--format", "csv", "--samples", "11"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!dir.path().join("trajectory.json").exists());
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 12);
    assert!(lines[0].starts_with("t,re_0,im_0"));
    let first = lines[1].split(',').next().unwrap();
    assert_eq!(first, "-1.8000000000000000e1");
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for k in 0..2 {
        let d = dir.path().join(k.to_string());
        let o = exec(&["run", scenario("fig9").to_str().unwrap(), "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        reports.push((fs::read(d.join("report.json")).unwrap(), fs::read(d.join("trajectory.csv")).unwrap(), fs::read(d.join("trajectory.json")).unwrap()));
    }
    assert!(reports[0] == reports[1]);
}

#[test]
fn serde_round_trip() {
    let o = exec(&["run", scenario("fig10").to_str().unwrap()]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let report: RunReport = serde_json::from_value(v["report"].clone()).unwrap();
    assert_eq!(serde_json::to_value(&report).unwrap(), v["report"]);
    let a = analyze("fig2");
    let analysis: AnalysisReport = serde_json::from_value(a["report"].clone()).unwrap();
    assert_eq!(serde_json::to_value(&analysis).unwrap(), a["report"]);
}

fn write_broken(dir: &Path, from: &str, to: &str) -> PathBuf {
    let src = fs::read_to_string(scenario("fig8")).unwrap();
    assert!(src.contains(from));
    let p = dir.join("broken.toml");
    fs::write(&p, src.replacen(from, to, 1)).unwrap();
    p
}

#[test]
fn malformed_file_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_broken(dir.path(), "rabi = 30.0", "rabi = = 30.0");
    let out = dir.path().join("out");
    let o = exec(&["run", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 9"), "{err}");

    let bad = write_broken(dir.path(), "kind = \"angular\"", "kind = \"angular\"\nspin = 3");
    let o = exec(&["analyze", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn invalid_values_exit_2_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_broken(dir.path(), "center = -2.0, width = 4.0", "center = -2.0, width = 0.0");
    let out = dir.path().join("out");
    let o = exec(&["run", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("stokes.envelope") && err.contains("line 16"), "{err}");
    assert!(!out.exists());

    let bad = write_broken(dir.path(), "m = 0, re", "m = 5, re");
    let o = exec(&["run", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let o = exec(&["run", scenario("fig8").to_str().unwrap(), "--rtol", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = exec(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    let o = exec(&["run", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn integrator_failure_exits_1_with_flagged_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_broken(dir.path(), "window = [-18.0, 18.0]", "window = [-18.0, 18.0]\nmax_steps = 5");
    let out = dir.path().join("out");
    let o = exec(&["run", bad.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let rep = read_json(&out.join("report.json"));
    validate("report.schema.json", &rep);
    assert_eq!(rep["status"], "numerical_failure");
    assert!(rep["message"].as_str().unwrap().contains("step"));
    assert!(!out.join("trajectory.csv").exists());
}

#[test]
fn sweep_runs_all_bundled() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["sweep".to_string()];
    for name in ["fig1", "fig2", "fig4", "fig8", "fig9", "fig10"] {
        args.push(scenario(name).to_string_lossy().into_owned());
    }
    args.extend(["--out".into(), dir.path().to_string_lossy().into_owned(), "--format".into(), "json".into()]);
    let o = bin().args(&args).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let sweep = read_json(&dir.path().join("sweep.json"));
    validate("sweep.schema.json", &sweep);
    let entries = sweep["report"].as_array().unwrap();
    assert_eq!(entries.len(), 6);
    for e in entries {
        assert_eq!(e["status"], "ok");
        assert!(e["norm_drift"].as_f64().unwrap() < 1e-9);
        let name = e["name"].as_str().unwrap();
        validate("report.schema.json", &read_json(&dir.path().join(name).join("report.json")));
    }

    let dup = bin().args(["sweep", scenario("fig8").to_str().unwrap(), scenario("fig8").to_str().unwrap(), "--out", dir.path().join("d").to_str().unwrap()]).output().unwrap();
    assert_eq!(dup.status.code(), Some(2));
    assert!(!dir.path().join("d").exists());
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = exec(&["oracle-check", "--points", "100", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rep = read_json(&dir.path().join("oracle_check.json"));
    validate("oracle_check.schema.json", &rep);
    assert_eq!(rep["report"]["pass"], true);
}
