use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_betawolff"))
        .args(args)
        .env_remove("BETAWOLFF_THREADS")
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_then_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    let out = run(&["gen", "--kind", "segment", "--N", "8", "--out", p(&m)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&m).unwrap().lines().count(), 8);

    let lj = dir.path().join("l.json");
    let out = run(&["lattice", "--in", p(&m), "--n", "1", "--out", p(&lj)]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&lj);
    assert_eq!(doc["checks"]["partition"], "ok");
    assert_eq!(doc["tree"]["atoms"], 8);
}

#[test]
fn verify_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    assert_eq!(run(&["gen", "--kind", "cantor4", "--g", "3", "--out", p(&m)]).status.code(), Some(0));
    let r = dir.path().join("report.json");
    let out = run(&["verify", "--in", p(&m), "--n", "1", "--out", p(&r)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&r);
    for key in ["lhs_lattice", "lhs_grid", "riesz_energy", "theta0_sq_mass", "r1", "r2"] {
        let v = doc[key].as_f64().unwrap_or_else(|| panic!("missing {key}"));
        assert!(v.is_finite() && v >= 0.0);
    }
    assert!(doc.get("runtimes").is_none());
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = run(&["lattice", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn missing_input_is_io_error() {
    let out = run(&["lattice", "--in", "/nonexistent/m.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_input_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(&m, "0,0,1\n1,0,-2\n").unwrap();
    assert_eq!(run(&["lattice", "--in", p(&m)]).status.code(), Some(1));
    assert_eq!(run(&["gen", "--kind", "torus", "--N", "4"]).status.code(), Some(1));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out_cfg = dir.path().join("from_cfg.json");
    let out_flag = dir.path().join("from_flag.json");
    std::fs::write(&cfg, format!(r#"{{"kind": "segment", "N": 64, "a0": 32, "out": "{}"}}"#, p(&out_cfg))).unwrap();
    assert_eq!(run(&["--config", p(&cfg), "lattice"]).status.code(), Some(0));
    assert_eq!(json(&out_cfg)["params"]["a0"], 32);
    assert_eq!(run(&["--config", p(&cfg), "lattice", "--a0", "16", "--out", p(&out_flag)]).status.code(), Some(0));
    assert_eq!(json(&out_flag)["params"]["a0"], 16);

    std::fs::write(&cfg, r#"{"kind": "segment", "typo": 1}"#).unwrap();
    assert_eq!(run(&["--config", p(&cfg), "lattice"]).status.code(), Some(1));
}

#[test]
fn outputs_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        let out = run(&["--threads", "2", "coeffs", "--kind", "cantor4", "--g", "3", "--energies", "--out", p(path)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn riesz_corona_capacity_suite() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("f.csv");
    let summary = dir.path().join("s.json");
    let out = run(&["riesz", "--kind", "segment", "--N", "128", "--out", p(&field), "--summary", p(&summary)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&field).unwrap().lines().count(), 129);
    assert!(json(&summary)["riesz_energy"].as_f64().unwrap() > 0.0);

    let tree = dir.path().join("t.csv");
    let out = run(&["riesz", "--kind", "segment", "--N", "128", "--theta-mac", "0.3", "--out", p(&tree)]);
    assert_eq!(out.status.code(), Some(0));

    let c = dir.path().join("c.json");
    let out = run(&["corona", "--kind", "segment", "--N", "256", "--delta0", "1e-4", "--out", p(&c)]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&c);
    assert_eq!(doc["top"].as_array().unwrap().len(), 1);
    assert_eq!(doc["top"][0]["root"], 0);

    let k = dir.path().join("k.json");
    let out = run(&["capacity", "--kind", "segment", "--N", "256", "--atoms", "0..128", "--out", p(&k)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&k)["set_size"], 128);

    let battery = dir.path().join("battery.json");
    std::fs::write(
        &battery,
        r#"{"entries": [{"generator": {"kind": "segment", "count": 128}}, {"generator": {"kind": "cantor4", "generations": 3, "ratio": 0.25}}]}"#,
    )
    .unwrap();
    let report = dir.path().join("suite.json");
    let plots = dir.path().join("plots");
    let out = run(&["suite", "--battery", p(&battery), "--out", p(&report), "--plots-dir", p(&plots)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = json(&report);
    assert_eq!(doc["entries"].as_array().unwrap().len(), 2);
    assert!(plots.join("cantor4_n1_lhs_grid.csv").exists());

    std::fs::write(&battery, r#"{"entries": []}"#).unwrap();
    let out = run(&["suite", "--battery", p(&battery), "--out", p(&report)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&report)["entries"].as_array().unwrap().len(), 0);
}
