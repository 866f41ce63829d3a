//! Synthetic deployments and a plaintext oracle for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use veriquery::encodings::OperationKind;
use veriquery::query::Query;
use veriquery_node::data::Table;

pub fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

/// Per-DP records over columns `x`, `y`, `z`; every column draws integers
/// uniformly from `[lo, hi)`.
pub fn random_rows(seed: u64, n_dp: usize, rows: usize, lo: i64, hi: i64) -> BTreeMap<String, Vec<Vec<f64>>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    ids("dp", n_dp)
        .into_iter()
        .map(|dp| {
            let recs = (0..rows)
                .map(|_| (0..3).map(|_| rng.gen_range(lo..hi) as f64).collect())
                .collect();
            (dp, recs)
        })
        .collect()
}

pub fn tables(rows: &BTreeMap<String, Vec<Vec<f64>>>) -> BTreeMap<String, Table> {
    rows.iter()
        .map(|(dp, r)| (dp.clone(), Table::numeric(&["x", "y", "z"], r)))
        .collect()
}

fn column(name: &str) -> usize {
    match name {
        "x" => 0,
        "y" => 1,
        "z" => 2,
        _ => panic!("unknown column {name}"),
    }
}

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
pub fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// The result of `q` computed directly on the plaintext records of the
/// DPs it names.
pub fn oracle(q: &Query, rows: &BTreeMap<String, Vec<Vec<f64>>>) -> Vec<f64> {
    use OperationKind::*;
    let op = &q.operation;
    let cols: Vec<usize> = q.attributes.iter().map(|a| column(a)).collect();
    let per_dp: Vec<Vec<Vec<f64>>> = q
        .dps
        .iter()
        .map(|dp| {
            rows[dp]
                .iter()
                .map(|r| cols.iter().map(|&c| r[c]).collect())
                .collect()
        })
        .collect();
    let all: Vec<&Vec<f64>> = per_dp.iter().flatten().collect();
    let xs: Vec<f64> = all.iter().map(|r| r[0]).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let hit = |x: f64| match op.bounds {
        Some((lo, hi)) => x >= lo as f64 && x < hi as f64,
        None => x != 0.0,
    };
    let domain = || {
        let (lo, hi) = op.bounds.unwrap();
        lo..hi
    };
    let sets: Vec<BTreeSet<i64>> = per_dp.iter().map(|d| d.iter().map(|r| r[0] as i64).collect()).collect();
    let b = |v: bool| if v { 1.0 } else { 0.0 };
    match op.kind {
        Sum => vec![xs.iter().sum()],
        Mean => vec![mean],
        Variance => vec![var],
        StdDev => vec![var.sqrt()],
        Or => vec![b(xs.iter().any(|&x| hit(x)))],
        And => vec![b(xs.iter().all(|&x| hit(x)))],
        Min => vec![xs.iter().cloned().fold(f64::INFINITY, f64::min)],
        Max => vec![xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)],
        FreqCount => domain().map(|v| xs.iter().filter(|&&x| x as i64 == v).count() as f64).collect(),
        SetUnion => domain().filter(|v| sets.iter().any(|s| s.contains(v))).map(|v| v as f64).collect(),
        SetIntersection => domain().filter(|v| sets.iter().all(|s| s.contains(v))).map(|v| v as f64).collect(),
        Cosim => {
            let dot: f64 = all.iter().map(|r| r[0] * r[1]).sum();
            let na: f64 = all.iter().map(|r| r[0] * r[0]).sum::<f64>().sqrt();
            let nb: f64 = all.iter().map(|r| r[1] * r[1]).sum::<f64>().sqrt();
            vec![dot / (na * nb)]
        }
        R2 => {
            let m = op.model.as_ref().unwrap();
            let d = op.features;
            let ys: Vec<f64> = all.iter().map(|r| r[d]).collect();
            let ym = ys.iter().sum::<f64>() / n;
            let ss_tot: f64 = ys.iter().map(|y| (y - ym).powi(2)).sum();
            let ss_res: f64 = all
                .iter()
                .map(|r| {
                    let pred = m[0] + (0..d).map(|j| m[j + 1] * r[j]).sum::<f64>();
                    (r[d] - pred).powi(2)
                })
                .sum();
            vec![1.0 - ss_res / ss_tot]
        }
        LinReg => {
            let d = op.features;
            let design = |r: &Vec<f64>| -> Vec<f64> { std::iter::once(1.0).chain(r[..d].iter().cloned()).collect() };
            let mut ata = vec![vec![0.0; d + 1]; d + 1];
            let mut aty = vec![0.0; d + 1];
            for r in &all {
                let z = design(r);
                for i in 0..=d {
                    aty[i] += z[i] * r[d];
                    for j in 0..=d {
                        ata[i][j] += z[i] * z[j];
                    }
                }
            }
            gauss(ata, aty)
        }
        LogReg => panic!("no closed-form oracle for logistic regression"),
    }
}

/// Integer-valued results must match exactly, ratios within `1/scale`.
pub fn matches(kind: OperationKind, scale: i64, got: &[f64], want: &[f64]) -> bool {
    let tol = if kind.is_ratio() { 1.0 / scale as f64 } else { 0.0 };
    got.len() == want.len() && got.iter().zip(want).all(|(g, w)| (g - w).abs() <= tol)
}

/// One end-to-end case: query text over `dps`, and the range data is drawn from.
pub struct Case {
    pub text: String,
    pub data: (i64, i64),
}

/// Every operation except logistic regression, plus the bit-mode variants
/// of the bitwise ones (`--bitwise bits`).
pub fn e2e_cases(dps: &[String]) -> Vec<(Case, bool)> {
    let on = dps.join(",");
    let c = |s: &str, lo, hi| Case {
        text: format!("SELECT {s}").replace("{dps}", &on),
        data: (lo, hi),
    };
    let plain = [
        c("sum x ON {dps}", 0, 256),
        c("mean x ON {dps}", 0, 256),
        c("variance x ON {dps}", 0, 256),
        c("stddev x ON {dps}", 0, 256),
        c("cosim x,y ON {dps}", 0, 256),
        c("r2 x,y ON {dps} MODEL 1,0.5", 0, 16),
        c("lin_reg x,y,z ON {dps}", 0, 16),
        c("frequency x ON {dps} RANGE 0,16", 0, 16),
    ];
    let bitwise = [
        c("and x ON {dps} RANGE 3,64", 0, 64),
        c("or x ON {dps} RANGE 60,64", 0, 64),
        c("min x ON {dps} RANGE 0,32", 0, 32),
        c("max x ON {dps} RANGE 0,32", 0, 32),
        c("union x ON {dps} RANGE 0,32", 0, 32),
        c("intersection x ON {dps} RANGE 0,4", 0, 2),
    ];
    let mut out: Vec<(Case, bool)> = plain.into_iter().map(|c| (c, false)).collect();
    for b in bitwise {
        let again = Case {
            text: b.text.clone(),
            data: b.data,
        };
        out.push((b, false));
        out.push((again, true));
    }
    out
}
