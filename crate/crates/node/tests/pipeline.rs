mod common;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use veriquery::group::{Group, Ristretto};
use veriquery::protocols::{quantize_laplace_fixed, PrivacyParams};
use veriquery::query::{parse_query, Query};
use veriquery_node::config::{Fault, Scheduler};
use veriquery_node::frame::Round;
use veriquery_node::{Config, HarnessError, QueryFailure, System};

fn system(config: Config, rows: &BTreeMap<String, Vec<Vec<f64>>>) -> System<Ristretto> {
    System::new(config, common::tables(rows)).unwrap()
}

fn local(n_cn: usize, n_dp: usize, n_vn: usize, seed: u64) -> Config {
    let mut c = Config::local(n_cn, n_dp, n_vn);
    c.seed = Some(seed);
    c
}

fn query(text: &str, dps: &[String]) -> Query {
    parse_query(&text.replace("{dps}", &dps.join(","))).unwrap()
}

#[test]
fn variance_over_ten_providers() {
    let dps = common::ids("dp", 10);
    let rows = common::random_rows(3, 10, 4, 0, 256);
    let mut s = system(local(3, 10, 3, 3), &rows);
    let q = query("SELECT variance x ON {dps}", &dps);
    let out = s.run_query(&q).unwrap();
    let got = out.value().unwrap();
    let want = common::oracle(&q, &rows)[0];
    assert!((got.values[0] - want).abs() <= 0.01, "{} vs {want}", got.values[0]);
    assert_eq!(got.count, 40);
    let block = out.result.block.unwrap();
    assert!(block.committed);
    assert_eq!(block.signatures, 3);
}

#[test]
fn filter_matching_nothing_is_zero_count() {
    let dps = common::ids("dp", 4);
    let rows = common::random_rows(1, 4, 3, 0, 10);
    let mut s = system(local(2, 4, 1, 1), &rows);
    let out = s.run_query(&query("SELECT mean x ON {dps} WHERE y > 100", &dps)).unwrap();
    assert_eq!(out.result.result, Err(QueryFailure::ZeroCount));
    assert!(matches!(out.value(), Err(HarnessError::ZeroCount)));
}

#[test]
fn offline_provider_is_left_out() {
    let dps = common::ids("dp", 5);
    let rows = common::random_rows(2, 5, 3, 0, 100);
    let mut c = local(2, 5, 3, 2);
    c.dp[4].fault = Some(Fault::Offline);
    let mut s = system(c, &rows);
    let q = query("SELECT sum x ON {dps}", &dps);
    let out = s.run_query(&q).unwrap();
    let got = out.value().unwrap();
    let responders = query("SELECT sum x ON dp0,dp1,dp2,dp3", &dps);
    assert_eq!(got.values, common::oracle(&responders, &rows));
    assert_eq!(got.count, 12);
    // the missing provider shows up as unreceived proofs, not as a failure
    assert!(out.result.block.unwrap().committed);
}

#[test]
fn offline_computing_node_aborts() {
    let dps = common::ids("dp", 4);
    let rows = common::random_rows(2, 4, 2, 0, 100);
    let mut s = system(local(3, 4, 1, 2), &rows);
    let q = query("SELECT sum x ON {dps}", &dps);
    assert!(s.run_query(&q).unwrap().value().is_ok());
    s.set_fault("cn2", Some(Fault::Offline)).unwrap();
    let out = s.run_query(&q).unwrap();
    assert!(matches!(out.value(), Err(HarnessError::CnUnavailable(_))), "{:?}", out.result);
    s.set_fault("cn2", None).unwrap();
    let again = s.run_query(&q).unwrap();
    assert!(again.value().is_ok(), "{:?}", again.result);
}

#[test]
fn differential_privacy_adds_one_list_value() {
    let dps = common::ids("dp", 6);
    let rows = common::random_rows(4, 6, 3, 0, 100);
    let params = PrivacyParams {
        epsilon: 1.0,
        delta_f: 1.0,
        theta: 0.5,
        list_len: 20,
    };
    let noise = quantize_laplace_fixed(&params, 100).unwrap();
    let q = query("SELECT sum x ON {dps}", &dps).with_privacy(params);
    let truth = common::oracle(&q, &rows)[0];
    let mut s = system(local(3, 6, 3, 4), &rows);
    let out = s.run_query(&q).unwrap();
    let got = out.value().unwrap().values[0];
    let added = ((got - truth) * 100.0).round() as i64;
    assert!(noise.contains(&added), "{added} not in {noise:?}");
    // one shuffle bundle per CN
    let shuffles = s
        .vn_bundles("vn0", out.query_id())
        .iter()
        .filter(|b| b.proof_type == veriquery::ledger::ProofType::Shuffle)
        .count();
    assert_eq!(shuffles, 3);
    assert_eq!(s.audit(out.query_id()).unwrap().false_entries.len(), 0);
}

#[test]
fn serial_runs_are_deterministic() {
    let dps = common::ids("dp", 6);
    let rows = common::random_rows(5, 6, 3, 0, 32);
    let run = || {
        let mut s = system(local(3, 6, 3, 11), &rows);
        let a = s.run_query(&query("SELECT max x ON {dps} RANGE 0,32", &dps)).unwrap();
        let b = s.run_query(&query("SELECT variance x ON {dps}", &dps)).unwrap();
        let chains: Vec<Vec<u8>> = ["vn0", "vn1", "vn2"].iter().map(|v| s.chain(v).unwrap().to_bytes()).collect();
        (a.result, b.result, chains)
    };
    let first = run();
    assert_eq!(first.2[0].len(), first.2[1].len());
    assert_eq!(first, run());
}

#[test]
fn concurrent_scheduler_matches_serial() {
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let dps = common::ids("dp", 6);
    let texts = [
        "SELECT sum x ON {dps}",
        "SELECT mean x ON {dps} WHERE y >= 5",
        "SELECT variance x ON {dps}",
        "SELECT or x ON {dps} RANGE 14,16",
        "SELECT max x ON {dps} RANGE 0,16",
        "SELECT frequency x ON {dps} RANGE 0,16",
        "SELECT cosim x,y ON {dps}",
        "SELECT lin_reg x,y ON {dps}",
    ];
    for i in 0..100u64 {
        let rows = common::random_rows(i, 6, 3, 0, 16);
        let text = texts[rng.gen_range(0..texts.len())];
        let k = rng.gen_range(1..=6);
        let q = query(text, &dps[..k]);
        let mut serial = system(local(3, 6, 2, i), &rows);
        let mut c = local(3, 6, 2, i + 1000);
        c.scheduler = Scheduler::Concurrent;
        let mut concurrent = system(c, &rows);
        let a = serial.run_query(&q).unwrap();
        let b = concurrent.run_query(&q).unwrap();
        let (a, b) = (a.value().map(|r| r.values.clone()), b.value().map(|r| r.values.clone()));
        match (&a, &b) {
            (Ok(x), Ok(y)) => assert!(common::matches(q.operation.kind, 100, x, y), "{text}: {x:?} {y:?}"),
            _ => assert_eq!(format!("{a:?}"), format!("{b:?}"), "{text}"),
        }
    }
}

#[test]
fn colocated_roles_behave_like_separate_nodes() {
    let dps = common::ids("dp", 4);
    let rows = common::random_rows(8, 4, 3, 0, 64);
    let q = query("SELECT stddev x ON {dps}", &dps);
    let mut results = Vec::new();
    for colocate in [false, true] {
        let mut c = local(2, 4, 2, 8);
        c.scheduler = Scheduler::Concurrent;
        let mut s = system(c, &rows);
        if colocate {
            s.colocate(vec![vec!["cn0".into(), "vn0".into()], vec!["cn1".into(), "vn1".into(), "dp0".into()]]);
        }
        let out = s.run_query(&q).unwrap();
        assert!(out.result.block.as_ref().unwrap().committed);
        results.push(out.result.result);
    }
    assert_eq!(results[0], results[1]);
}

/// No plaintext value, in any of the encodings a careless implementation
/// would use, crosses the wire between the providers and the querier.
#[test]
fn plaintexts_never_leave_providers() {
    let dps = common::ids("dp", 4);
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let rows: BTreeMap<String, Vec<Vec<f64>>> = dps
        .iter()
        .map(|d| {
            let r = (0..3)
                .map(|_| (0..3).map(|_| rng.gen_range(1000..2000) as f64 + 0.37).collect())
                .collect();
            (d.clone(), r)
        })
        .collect();
    let mut needles: Vec<Vec<u8>> = Vec::new();
    for r in rows.values().flatten() {
        for &x in r {
            let fixed = (x * 100.0).round() as i64;
            needles.push(fixed.to_le_bytes().to_vec());
            needles.push(fixed.to_be_bytes().to_vec());
            needles.push(Ristretto::encode_point(&Ristretto::mul_base(&Ristretto::scalar_from_i64(fixed))));
            needles.push(x.to_le_bytes().to_vec());
            needles.push(format!("{x}").into_bytes());
        }
    }
    let mut s = system(local(2, 4, 2, 9), &rows);
    let mut scanned = 0;
    for text in ["SELECT sum x ON {dps}", "SELECT variance y ON {dps}", "SELECT cosim x,z ON {dps}"] {
        let out = s
            .run_query_traced(&query(text, &dps), |m| {
                let relevant = matches!(
                    m.round,
                    Round::DpResponse | Round::Partial | Round::RoundShare | Round::Result | Round::Proof
                );
                if relevant {
                    scanned += 1;
                    for n in &needles {
                        assert!(!m.payload.windows(n.len()).any(|w| w == n), "{:?} leaks", m.round);
                    }
                }
            })
            .unwrap();
        assert!(out.value().is_ok());
    }
    assert!(scanned > 20);
}

#[test]
fn chains_persist_across_restarts() {
    let dir = tempfile::tempdir().unwrap();
    let dps = common::ids("dp", 3);
    let rows = common::random_rows(6, 3, 2, 0, 50);
    let q = query("SELECT sum x ON {dps}", &dps);
    let mut c = local(2, 3, 2, 6);
    c.data_dir = Some(dir.path().to_path_buf());
    let first = system(c.clone(), &rows).run_query(&q).unwrap();
    let mut again = system(c, &rows);
    assert_eq!(again.chain("vn1").unwrap().height(), 1);
    let second = again.run_query(&q).unwrap();
    assert_ne!(first.query_id(), second.query_id());
    assert_eq!(second.result.block.unwrap().height, 1);
    for vn in ["vn0", "vn1"] {
        let bytes = std::fs::read(again.chain_path(vn).unwrap()).unwrap();
        assert_eq!(bytes, again.chain(vn).unwrap().to_bytes());
    }
    assert!(again.audit(first.query_id()).is_ok());
}

#[test]
fn unknown_provider_is_rejected() {
    let rows = common::random_rows(0, 2, 1, 0, 5);
    let mut s = system(local(1, 2, 1, 0), &rows);
    let q = parse_query("SELECT sum x ON dp0,dp9").unwrap();
    assert!(matches!(s.run_query(&q), Err(HarnessError::Invalid(_))));
}

#[test]
fn iterative_extreme_over_encrypted_subqueries() {
    let dps = common::ids("dp", 3);
    // dp0 only holds values the halving discards
    let rows: BTreeMap<String, Vec<Vec<f64>>> = [
        ("dp0", vec![vec![5.0, 0.0, 0.0], vec![12.0, 0.0, 0.0]]),
        ("dp1", vec![vec![990.0, 0.0, 0.0], vec![400.0, 0.0, 0.0]]),
        ("dp2", vec![vec![731.0, 0.0, 0.0]]),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    let mut s = system(local(2, 3, 1, 9), &rows);
    for (kind, want) in [("max", 990), ("min", 5)] {
        let q = query(&format!("SELECT {kind} x ON {{dps}} RANGE 0,1000"), &dps);
        let out = s.run_iterative_extreme(&q, 100).unwrap();
        assert_eq!((out.value, out.rounds, out.ciphertexts), (want, 3, 128), "{kind}");
    }
}
