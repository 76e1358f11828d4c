//! End-to-end runs of the binary: outputs, provenance fields and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_supou-lqc"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn point_mass_config() -> Value {
    json!({
        "model": {
            "x_floor": {"value": 0.0, "unit": "m3/s"},
            "B_pi": {"value": 1.0, "unit": "1/h"},
            "alpha_pi": {"value": 2.0, "unit": "-"},
            "a_nu": {"value": 0.0, "unit": "(m3/s)^alpha/h"},
            "b_nu": {"value": 1.0, "unit": "(s/m3)^p"},
            "p_nu": {"value": 1.0, "unit": "-"},
            "alpha_nu": {"value": 0.0, "unit": "-"}
        },
        "lift": {"weights": [1.0], "rates": {"values": [1.0], "unit": "1/h"}},
        "problem": {
            "period": {"value": 40.0, "unit": "h"},
            "target": {"kind": "constant", "value": 1.0},
            "state_weight": {"kind": "constant", "value": 1.0},
            "w": 1.0
        },
        "solver": {"dt": {"value": 0.01, "unit": "h"}, "tol": 1e-13},
        "seed": 7
    })
}

fn write_config(dir: &Path, v: &Value) -> std::path::PathBuf {
    let p = dir.join("run.json");
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn point_mass_riccati_and_kbe() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &point_mass_config());
    let out = dir.path().join("out");
    let o = run(&["--config", cfg.to_str().unwrap(), "riccati"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out.join("riccati.json"));
    assert!((r["H"].as_f64().unwrap() - 0.25).abs() < 1e-9, "{r}");
    assert_eq!(r["seed"], 7);
    assert_eq!(r["command"], "riccati");
    assert!(r["config"]["model"]["B_pi"].is_object());

    let o = run(&["--config", cfg.to_str().unwrap(), "kbe"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let k = read_json(&out.join("kbe.json"));
    assert!((k["C"].as_f64().unwrap() - 0.125).abs() < 1e-9, "{k}");
    assert!((k["D"].as_f64().unwrap() - 0.125).abs() < 1e-9, "{k}");
}

#[test]
fn embedded_config_reproduces_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &point_mass_config());
    let out = dir.path().join("a");
    assert!(run(&["--config", cfg.to_str().unwrap(), "--seed", "11", "riccati"], &out).status.success());
    let first = read_json(&out.join("riccati.json"));
    assert_eq!(first["seed"], 11);

    let replay = write_config(&out, &first["config"]);
    let out2 = dir.path().join("b");
    let o = run(&["--config", replay.to_str().unwrap(), "riccati"], &out2);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let second = read_json(&out2.join("riccati.json"));
    assert_eq!(first["H"], second["H"]);
    assert_eq!(second["seed"], 11);

    let csv = std::fs::read_to_string(out.join("riccati_series.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "# supou-lqc riccati seed=11");
    assert!(lines.next().unwrap().starts_with("# config: {"));
    assert_eq!(lines.next().unwrap(), "t_h,c_dot_B,c_dot_diagA");
}

#[test]
fn oracle_on_point_mass_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &point_mass_config());
    let out = dir.path().join("out");
    let o = run(&["--config", cfg.to_str().unwrap(), "oracle-d"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&out.join("oracle.json"));
    assert_eq!(r["jumps_zeroed"], false);
    assert!(r["max_rel_dev"].as_f64().unwrap() < 1e-8, "{r}");
}

#[test]
fn mms_table_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["mms", "--beta", "0.5", "--n", "10,20"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("mms.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("n,H,e_n"));
    assert!(rows[1].starts_with("10,"));
    let j = read_json(&out.join("mms.json"));
    assert_eq!(j["config"]["mms"]["n"], json!([10, 20]));
}

#[test]
fn stats_on_small_series() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("q.csv");
    let mut s = String::from("time,discharge\n");
    for k in 0..400 {
        let x = 2.0 + (k as f64 * 0.3).sin() + 0.1 * (k % 7) as f64;
        s.push_str(&format!("{k},{x}\n"));
    }
    std::fs::write(&data, s).unwrap();
    let out = dir.path().join("out");
    let o = run(&["stats", "--data", data.to_str().unwrap(), "--max-lag", "24", "--bins", "12"], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&out.join("stats.json"));
    assert_eq!(j["samples"], 400);
    let acf_rows = std::fs::read_to_string(out.join("acf.csv")).unwrap().lines().count();
    assert_eq!(acf_rows, 2 + 1 + 25);
    let pdf_rows = std::fs::read_to_string(out.join("pdf.csv")).unwrap().lines().count();
    assert_eq!(pdf_rows, 2 + 1 + 12);
}

#[test]
fn missing_config_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = run(&["--config", missing.to_str().unwrap(), "riccati"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.json"));
}

#[test]
fn bare_number_for_dimensional_field_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &json!({"lift": {"n": 10, "eta_bar": 0.5}}));
    let o = run(&["--config", cfg.to_str().unwrap(), "riccati"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("eta_bar") && err.contains("unit"), "{err}");
}

#[test]
fn missing_model_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = point_mass_config();
    v["model"].as_object_mut().unwrap().remove("alpha_nu");
    let cfg = write_config(dir.path(), &v);
    let o = run(&["--config", cfg.to_str().unwrap(), "riccati"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.alpha_nu"));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = bin().arg("no-such-command").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_data_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["stats", "--data", dir.path().join("absent.csv").to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}
