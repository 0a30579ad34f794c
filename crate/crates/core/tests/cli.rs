//! The command-line tool as a user runs it: exit codes, error records, output files.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planar-trap")).current_dir(dir).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

/// Last stderr line, which carries the machine-readable error record.
fn error_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap_or_else(|e| panic!("{e}: {text}"))
}

#[test]
fn qmax_without_drag() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["--out", "q", "qmax", "--b", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["qmax"].as_f64().unwrap() - 0.908).abs() < 1e-3);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("q/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "qmax");
    assert_eq!(manifest["outputs"][0], "summary.json");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn invalid_geometry_exits_with_validation_code() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("bad.json"), r#"{"w_c": 290, "w_r": 500, "g": -250, "unit": "um"}"#).unwrap();
    let out = run(tmp.path(), &["validate", "--layout", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["error"], "validation");
    assert_eq!(rec["exit_code"], 2);
}

#[test]
fn malformed_config_reports_position() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.json"), "{\n  \"a\": oops\n}\n").unwrap();
    let out = run(tmp.path(), &["--config", "c.json", "qmax"]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert_eq!(rec["line"], 2);
    assert!(rec["column"].as_u64().unwrap() > 0);
    assert!(rec["file"].as_str().unwrap().ends_with("c.json"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"a": 0, "bogus": 1}"#).unwrap();
    let out = run(tmp.path(), &["--config", "c.json", "qmax"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_record(&out)["message"].as_str().unwrap().contains("bogus"));
}

#[test]
fn unwritable_output_exits_with_io_code() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("file"), "").unwrap();
    let out = run(tmp.path(), &["--out", "file/sub", "qmax"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_record(&out)["error"], "io");
}

#[test]
fn unbracketed_boundary_exits_with_numerical_code() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["qmax", "--a", "-0.5"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_record(&out)["error"], "numerical");
}

#[test]
fn bad_flag_value_exits_with_validation_code() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["shuttle", "--pressure", "70 furlongs"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn flags_override_config_values() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"a": 0.0, "q": 0.3, "b": 0.2}"#).unwrap();
    let out = run(tmp.path(), &["--config", "c.json", "stability", "--q", "1.2"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["q"], 1.2);
    assert_eq!(v["b"], 0.2);
    assert_eq!(v["stable"], false);
}

#[test]
fn units_in_config_and_flags_agree() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("c.json"), r#"{"pressure": "0.7 mbar", "omega": "5kHz"}"#).unwrap();
    let a = stdout_json(&run(tmp.path(), &["--out", "a", "--config", "c.json", "qmax"]));
    let b = stdout_json(&run(tmp.path(), &["--out", "b", "qmax", "--pressure", "70Pa", "--omega", "5kHz"]));
    assert_eq!(a["b"], b["b"]);
    assert!(a["b"].as_f64().unwrap() > 0.1);
}

#[test]
fn job_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let args = |out: &'static str, jobs: &'static str| {
        vec!["--out", out, "--jobs", jobs, "sweep-geometry", "--wc-r0", "0.4:0.6:2", "--log10-wr-r0", "0.3:0.5:2"]
    };
    assert_eq!(run(tmp.path(), &args("one", "1")).status.code(), Some(0));
    assert_eq!(run(tmp.path(), &args("two", "2")).status.code(), Some(0));
    let a = fs::read(tmp.path().join("one/geometry.csv")).unwrap();
    let b = fs::read(tmp.path().join("two/geometry.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("# tool: planar-trap"));
    assert!(!text.contains("time"));
}

#[test]
fn shuttle_pressure_scan_writes_csv_and_plot() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["--out", "s", "--gnuplot", "shuttle", "--pressures", "100,1000"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("s/shuttle.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3, "{csv}");
    assert!(tmp.path().join("s/plot.gp").exists());
}

#[test]
fn design_example_reproduces_the_worked_trap() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["--out", "d", "design-example"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let np = &v["no_plate"];
    assert!((np["r0"].as_f64().unwrap() / 500e-6 - 1.0).abs() < 0.05);
    assert!((np["depth_ev"].as_f64().unwrap() / 0.47 - 1.0).abs() < 0.15);
    assert_eq!(np["escape"], "UP");
    let wp = &v["with_plate"];
    assert!((wp["depth_ev"].as_f64().unwrap() / 4.6 - 1.0).abs() < 0.2);
    let summary: Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("d/summary.json")).unwrap()).unwrap();
    assert_eq!(summary, v);
}

#[test]
fn depth_command_on_a_layout_file() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("l.json"), r#"{"w_c": 290, "w_r": 500, "g": 250, "unit": "um"}"#).unwrap();
    let out = run(tmp.path(), &["--out", "o", "depth", "--layout", "l.json", "--v-rf", "500V", "--omega", "10MHz"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert!((v["d"].as_f64().unwrap() / 0.0065 - 1.0).abs() < 0.15, "{v}");
    assert!(tmp.path().join("o/psi.csv").exists());
}
