use std::path::Path;
use std::process::{Command, Output};

fn veriquery(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_veriquery"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

const CONFIG: &str = r#"
seed = 3
data_dir = "chains"

[privacy]
epsilon = 1.0
delta_f = 1.0
theta = 0.5
list_len = 10

[[cn]]
id = "cn0"
[[cn]]
id = "cn1"

[[dp]]
id = "dp0"
cn = "cn0"
data = "dp0.csv"
[[dp]]
id = "dp1"
cn = "cn1"
data = "dp1.csv"

[[vn]]
id = "vn0"
[[vn]]
id = "vn1"
"#;

fn deployment() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("config.toml"), CONFIG).unwrap();
    std::fs::write(dir.path().join("dp0.csv"), "x,y\n1,2\n3,4\n").unwrap();
    std::fs::write(dir.path().join("dp1.csv"), "x,y\n5,6\n").unwrap();
    dir
}

#[test]
fn query_then_audit() {
    let dir = deployment();
    let d = dir.path();
    let keys = json(&veriquery(&["keygen", "--config", "config.toml"], d));
    assert_eq!(keys["elgamal"].as_object().unwrap().len(), 3);
    let out = json(&veriquery(&["query", "SELECT sum x ON dp0,dp1", "--config", "config.toml"], d));
    assert_eq!(out["result"]["result"]["Ok"]["values"][0], 9.0);
    assert_eq!(out["result"]["block"]["committed"], true);
    let id = out["result"]["query_id"].as_str().unwrap();
    let report = json(&veriquery(&["audit", id, "--config", "config.toml"], d));
    assert_eq!(report["query_id"], id);
    assert_eq!(report["valid_signatures"], 2);
}

#[test]
fn query_flags() {
    let dir = deployment();
    let d = dir.path();
    let args = ["query", "SELECT or x ON dp0,dp1", "--config", "config.toml"];
    let hit = json(&veriquery(&[&args[..], &["--range", "4,6", "--bitwise", "bits"]].concat(), d));
    assert_eq!(hit["result"]["result"]["Ok"]["values"][0], 1.0);
    let miss = json(&veriquery(&[&args[..], &["--range", "6,9"]].concat(), d));
    assert_eq!(miss["result"]["result"]["Ok"]["values"][0], 0.0);
    let noisy = json(&veriquery(
        &["query", "SELECT sum y ON dp0,dp1", "--config", "config.toml", "--dp-privacy"],
        d,
    ));
    assert!(noisy["result"]["result"]["Ok"]["values"][0].is_number());
}

#[test]
fn experiment_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("sweep.toml"),
        "query = \"SELECT sum x ON {dps}\"\n[base]\nvns = 1\nrecords = 2\n[sweep]\ndps = [1, 2]\n",
    )
    .unwrap();
    veriquery(&["experiment", "sweep.toml", "--out", "report.json"], d);
    let rows: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 2);
    veriquery(&["plot", "report.json", "--metric", "bytes", "--out", "bytes.svg"], d);
    let svg = std::fs::read_to_string(d.join("bytes.svg")).unwrap();
    assert_eq!(svg.matches("<circle").count(), 2);
}

#[test]
fn errors_are_reported() {
    let dir = deployment();
    let out = Command::new(env!("CARGO_BIN_EXE_veriquery"))
        .args(["query", "SELEKT sum x ON dp0", "--config", "config.toml"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}
