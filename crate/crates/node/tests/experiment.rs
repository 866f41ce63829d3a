use veriquery_node::experiment::{run_experiment, ExperimentSpec};

fn spec(text: &str) -> ExperimentSpec {
    toml::from_str(text).unwrap()
}

#[test]
fn proof_load_grows_with_providers() {
    let rows = run_experiment(&spec(
        r#"
        query = "SELECT sum x ON {dps} RANGE 0,100000"
        profile = "bn254"
        seed = 5
        [base]
        vns = 2
        records = 2
        [sweep]
        dps = [6, 12, 24]
        "#,
    ))
    .unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.ok && r.values[0] > 0.0 && r.block_committed), "{rows:?}");
    for w in rows.windows(2) {
        assert!(w[0].proofs < w[1].proofs);
        assert!(w[0].proof_bytes < w[1].proof_bytes);
        assert!(w[0].messages < w[1].messages);
    }
}

#[test]
fn empty_sweep_gives_empty_report() {
    let s = spec("query = \"SELECT sum x ON {dps}\"\n[sweep]\ndps = []");
    assert!(run_experiment(&s).unwrap().is_empty());
    let s = spec("query = \"SELECT sum x ON {dps}\"");
    assert!(run_experiment(&s).unwrap().is_empty());
}

#[test]
fn subproof_coverage_follows_t_sub() {
    let rows = run_experiment(&spec(
        r#"
        query = "SELECT sum x ON {dps}"
        [base]
        cns = 2
        dps = 3
        vns = 7
        records = 1
        [sweep]
        t_sub = [0.2, 0.3, 1.0]
        "#,
    ))
    .unwrap();
    let p: Vec<f64> = rows.iter().map(|r| r.p_fh).collect();
    assert!(rows.iter().all(|r| r.f_h == 5));
    assert!((p[0] - 0.83486).abs() < 1e-4, "{p:?}");
    assert!((p[1] - 0.98482).abs() < 1e-4, "{p:?}");
    assert_eq!(p[2], 1.0);
    // checking fewer sub-proofs does less work
    assert!(rows[0].sub_proofs_checked < rows[2].sub_proofs_checked);
}

#[test]
fn bad_spec_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "query = 3").unwrap();
    assert!(ExperimentSpec::load(&path).is_err());
    let path = dir.path().join("ok.json");
    std::fs::write(&path, r#"{"query": "SELECT sum x ON {dps}", "sweep": {"vns": [1, 2]}}"#).unwrap();
    assert_eq!(ExperimentSpec::load(&path).unwrap().points().len(), 2);
}
