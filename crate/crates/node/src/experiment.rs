//! Parameter sweeps over synthetic deployments.
//!
//! ```toml
//! query = "SELECT variance x ON {dps} RANGE 0,4294967296"
//! profile = "bn254"
//! reps = 2
//!
//! [base]
//! cns = 3
//! dps = 6
//! vns = 3
//! records = 10
//!
//! [sweep]
//! dps = [6, 12, 24]
//! ```
//!
//! Every combination of the swept axes gives one run per repetition; axes
//! that are not swept keep their base value. `{dps}` in the query expands to
//! every DP of the run. A sweep without any axis is empty.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use veriquery::group::Profile;
use veriquery::ledger::coverage_probability;
use veriquery::query::parse_query;

use crate::config::{Config, ConfigError, Network, Scheduler};
use crate::data::Table;
use crate::system::AnySystem;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Point {
    pub cns: usize,
    pub dps: usize,
    pub vns: usize,
    /// Records per DP.
    pub records: usize,
    pub t: f64,
    pub t_sub: f64,
}

impl Default for Point {
    fn default() -> Self {
        Point {
            cns: 3,
            dps: 6,
            vns: 3,
            records: 10,
            t: 1.0,
            t_sub: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub cns: Option<Vec<usize>>,
    pub dps: Option<Vec<usize>>,
    pub vns: Option<Vec<usize>>,
    pub records: Option<Vec<usize>>,
    pub t: Option<Vec<f64>>,
    pub t_sub: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub query: String,
    #[serde(default)]
    pub profile: Option<Profile>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one_rep")]
    pub reps: usize,
    /// Records draw integers uniformly from `[0, value_max)`.
    #[serde(default = "value_max")]
    pub value_max: i64,
    #[serde(default)]
    pub network: Network,
    #[serde(default)]
    pub base: Point,
    #[serde(default)]
    pub sweep: Sweep,
}

fn one_rep() -> usize {
    1
}

fn value_max() -> i64 {
    100
}

impl ExperimentSpec {
    /// Reads TOML, or JSON when the file ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| ConfigError::Invalid(e.to_string()))
        } else {
            Ok(toml::from_str(&text)?)
        }
    }

    pub fn points(&self) -> Vec<Point> {
        let s = &self.sweep;
        let axes_given = [
            s.cns.is_some(),
            s.dps.is_some(),
            s.vns.is_some(),
            s.records.is_some(),
            s.t.is_some(),
            s.t_sub.is_some(),
        ];
        if !axes_given.contains(&true) {
            return Vec::new();
        }
        let b = self.base;
        let axis = |v: &Option<Vec<usize>>, d: usize| v.clone().unwrap_or_else(|| vec![d]);
        let faxis = |v: &Option<Vec<f64>>, d: f64| v.clone().unwrap_or_else(|| vec![d]);
        let mut out = Vec::new();
        for &cns in &axis(&s.cns, b.cns) {
            for &dps in &axis(&s.dps, b.dps) {
                for &vns in &axis(&s.vns, b.vns) {
                    for &records in &axis(&s.records, b.records) {
                        for &t in &faxis(&s.t, b.t) {
                            for &t_sub in &faxis(&s.t_sub, b.t_sub) {
                                out.push(Point {
                                    cns,
                                    dps,
                                    vns,
                                    records,
                                    t,
                                    t_sub,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// One run of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    #[serde(flatten)]
    pub point: Point,
    pub rep: usize,
    pub f_h: usize,
    /// Analytic probability that at least `f_h` VNs check a given sub-proof.
    pub p_fh: f64,
    pub query_id: String,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub values: Vec<f64>,
    pub messages: usize,
    pub bytes: usize,
    /// Proof bundles delivered to VNs (one per bundle and VN).
    pub proof_messages: usize,
    pub proof_bytes: usize,
    /// Distinct bundles the provers created.
    pub proofs: usize,
    pub sub_proofs_checked: usize,
    pub block_committed: bool,
    /// Simulated time until the querier decrypted the result.
    pub result_ms: Option<f64>,
    /// Simulated time until the block was committed.
    pub block_ms: Option<f64>,
    pub cpu_ms: BTreeMap<String, f64>,
    pub wall_ms: f64,
}

fn tables(point: &Point, value_max: i64, rng: &mut ChaCha20Rng) -> BTreeMap<String, Table> {
    (0..point.dps)
        .map(|i| {
            let rows: Vec<Vec<f64>> = (0..point.records)
                .map(|_| (0..3).map(|_| rng.gen_range(0..value_max) as f64).collect())
                .collect();
            (format!("dp{i}"), Table::numeric(&["x", "y", "z"], &rows))
        })
        .collect()
}

pub fn run_point(spec: &ExperimentSpec, point: Point, rep: usize) -> Result<Row, HarnessError> {
    let seed = spec.seed ^ (rep as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    let mut config = Config::local(point.cns, point.dps, point.vns);
    config.seed = Some(seed);
    config.scheduler = Scheduler::Serial;
    config.network = spec.network;
    config.verification.t = point.t;
    config.verification.t_sub = point.t_sub;
    if let Some(p) = spec.profile {
        config.profile = p;
    }
    let policy = config.policy();
    let p_fh = coverage_probability(&policy)?.p_fh_sub;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dps: Vec<String> = config.dp_ids();
    let query = parse_query(&spec.query.replace("{dps}", &dps.join(",")))?;
    let mut system = AnySystem::new(config, tables(&point, spec.value_max, &mut rng))?;
    let out = system.run_query(&query)?;
    let totals = system.role_stats();
    let (ok, error, values) = match &out.result.result {
        Ok(r) => (true, None, r.values.clone()),
        Err(e) => (false, Some(e.to_string()), Vec::new()),
    };
    let s = &out.stats;
    Ok(Row {
        point,
        rep,
        f_h: policy.f_h,
        p_fh,
        query_id: out.result.query_id.clone(),
        ok,
        error,
        values,
        messages: s.messages,
        bytes: s.bytes,
        proof_messages: s.proof_bundles,
        proof_bytes: s.proof_bytes,
        proofs: totals.bundles_sent,
        sub_proofs_checked: totals.sub_proofs_checked,
        block_committed: out.result.block.as_ref().is_some_and(|b| b.committed),
        result_ms: s.result_ms(),
        block_ms: s.round_ms.get("BlockDone").copied(),
        cpu_ms: s.cpu_ms.clone(),
        wall_ms: s.wall_ms,
    })
}

/// Runs every point of the sweep `reps` times.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<Row>, HarnessError> {
    let mut rows = Vec::new();
    for point in spec.points() {
        for rep in 0..spec.reps {
            let row = run_point(spec, point, rep)?;
            log::info!(
                "cns={} dps={} vns={} records={} t_sub={} rep={rep}: {:.1} ms",
                point.cns,
                point.dps,
                point.vns,
                point.records,
                point.t_sub,
                row.wall_ms
            );
            rows.push(row);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_form_the_product_of_swept_axes() {
        let mut spec: ExperimentSpec = toml::from_str(
            r#"
            query = "SELECT sum x ON {dps}"
            [sweep]
            dps = [2, 4]
            t_sub = [0.2, 1.0]
            "#,
        )
        .unwrap();
        let p = spec.points();
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|p| p.cns == 3 && p.vns == 3));
        assert_eq!((p[3].dps, p[3].t_sub), (4, 1.0));
        spec.sweep = Sweep::default();
        assert!(spec.points().is_empty());
        spec.sweep.vns = Some(Vec::new());
        assert!(spec.points().is_empty());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<ExperimentSpec>("query = \"x\"\nreps = 1\nbogus = 2").is_err());
    }
}
