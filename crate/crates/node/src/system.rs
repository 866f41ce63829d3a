//! A complete in-process deployment: every node of a [`Config`] with its
//! keys, data and chain, driven by one of the schedulers.

use std::any::Any;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};

use veriquery::encodings::{iterative_extreme, DecodedResult, ExtremeOutcome, ExtremeStep, OperationKind};
use veriquery::group::{Bn254, DlogTable, Group, Profile, Ristretto};
use veriquery::ledger::{audit, AuditReport, Chain, ProofBundle};
use veriquery::protocols::CnTree;
use veriquery::query::Query;

use crate::config::{Config, Fault, Scheduler};
use crate::data::Table;
use crate::frame::Message;
use crate::keys::{node_rng, Keyring};
use crate::roles::{Cn, Dp, Querier, QueryResult, Role, RoleStats, Shared, Vn};
use crate::runtime::{run_serial, run_threaded, Outputs, RunStats};
use crate::HarnessError;

/// The querier's view of a finished query plus what the run cost.
#[derive(Debug, Clone, serde::Serialize)]
pub struct QueryOutcome {
    pub result: QueryResult,
    pub stats: RunStats,
}

impl QueryOutcome {
    pub fn query_id(&self) -> &str {
        &self.result.query_id
    }

    /// The decoded result, or the failure as a [`HarnessError`].
    pub fn value(&self) -> Result<&DecodedResult, HarnessError> {
        self.result.result.as_ref().map_err(|f| f.clone().into())
    }
}

/// Baby-step tables are expensive, so systems of the same group share them.
fn dlog_table<G: Group>(max: u64, baby: Option<u64>) -> Arc<DlogTable<G>> {
    let baby = baby.unwrap_or_else(|| ((max as f64).sqrt().ceil() as u64).next_power_of_two().min(1 << 20));
    type Cache = Mutex<HashMap<(&'static str, u64, u64), Box<dyn Any + Send>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let mut cache = CACHE.get_or_init(Default::default).lock().expect("dlog cache");
    cache
        .entry((G::NAME, max, baby))
        .or_insert_with(|| Box::new(Arc::new(DlogTable::<G>::with_baby_steps(max, baby))))
        .downcast_ref::<Arc<DlogTable<G>>>()
        .expect("keyed by group")
        .clone()
}

pub struct System<G: Group> {
    shared: Arc<Shared<G>>,
    roles: BTreeMap<String, Role<G>>,
    keys: Keyring<G>,
    seed: u64,
    hosts: Vec<Vec<String>>,
    issued: BTreeSet<String>,
}

impl<G: Group> System<G> {
    /// Builds every node. DPs without an entry in `tables` hold no data and
    /// answer neutrally. VNs resume the chain stored under `data_dir`.
    pub fn new(config: Config, mut tables: BTreeMap<String, Table>) -> Result<Self, HarnessError> {
        config.validate()?;
        if config.profile != G::PROFILE {
            return Err(HarnessError::Invalid(format!(
                "configuration is for {}, system built for {}",
                config.profile.name(),
                G::NAME
            )));
        }
        let seed = config.seed.unwrap_or_else(rand::random);
        let keys = Keyring::<G>::derive(&config, seed)?;
        let cns = config.cn_ids();
        let vns = config.vn_ids();
        let verifying = keys.verifying();
        let shared = Arc::new(Shared {
            tree: CnTree::balanced(&cns)?,
            dp_cn: config.dp.iter().map(|d| (d.id.clone(), d.cn.clone())).collect(),
            vn_keys: vns.iter().map(|v| (v.clone(), verifying[v])).collect(),
            verifying,
            cn_public: cns.iter().map(|c| (c.clone(), *keys.elgamal[c].public())).collect(),
            collective: keys.collective,
            range: keys.range.clone(),
            policy: config.policy(),
            vns,
            config,
        });
        let config = &shared.config;
        let signing = |id: &str| keys.signing[id].clone();
        let mut roles = BTreeMap::new();
        let q = &config.querier.id;
        let querier = Querier::new(
            q.clone(),
            signing(q),
            keys.elgamal[q].clone(),
            dlog_table::<G>(config.dlog_max, config.dlog_baby_steps),
        );
        roles.insert(q.clone(), Role::Querier(Box::new(querier)));
        for id in &cns {
            let cn = Cn::new(
                id.clone(),
                signing(id),
                keys.elgamal[id].clone(),
                config.fault(id),
                node_rng(seed, id, "protocol"),
            );
            roles.insert(id.clone(), Role::Cn(Box::new(cn)));
        }
        for d in &config.dp {
            let table = match tables.remove(&d.id) {
                Some(t) => t,
                None => match &d.data {
                    Some(p) => Table::load(p)?,
                    None => Table::default(),
                },
            };
            let dp = Dp::new(
                d.id.clone(),
                signing(&d.id),
                table,
                config.fault(&d.id),
                node_rng(seed, &d.id, "protocol"),
            );
            roles.insert(d.id.clone(), Role::Dp(Box::new(dp)));
        }
        if let Some(d) = &config.data_dir {
            std::fs::create_dir_all(d)?;
        }
        for id in &shared.vns {
            let path = config.data_dir.as_ref().map(|d| d.join(format!("{id}.chain")));
            let chain = match &path {
                Some(p) if p.exists() => Chain::load(p)?,
                _ => Chain::default(),
            };
            let vn = Vn::new(id.clone(), signing(id), node_rng(seed, id, "protocol"), chain, path);
            roles.insert(id.clone(), Role::Vn(Box::new(vn)));
        }
        Ok(System {
            shared,
            roles,
            keys,
            seed,
            hosts: Vec::new(),
            issued: BTreeSet::new(),
        })
    }

    /// Builds the system with the DP data files named in the configuration.
    pub fn from_config(config: Config) -> Result<Self, HarnessError> {
        Self::new(config, BTreeMap::new())
    }

    pub fn config(&self) -> &Config {
        &self.shared.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn keys(&self) -> &Keyring<G> {
        &self.keys
    }

    pub fn shared(&self) -> &Arc<Shared<G>> {
        &self.shared
    }

    /// Groups nodes into processes for the concurrent scheduler; nodes not
    /// listed run alone.
    pub fn colocate(&mut self, hosts: Vec<Vec<String>>) {
        self.hosts = hosts;
    }

    /// Takes a node down (or brings it back) between queries.
    pub fn set_fault(&mut self, id: &str, fault: Option<Fault>) -> Result<(), HarnessError> {
        let role = self
            .roles
            .get_mut(id)
            .ok_or_else(|| HarnessError::Invalid(format!("unknown node {id}")))?;
        if !role.set_fault(fault) {
            return Err(HarnessError::Invalid(format!("{id} cannot be faulted")));
        }
        Ok(())
    }

    fn vn(&self, id: &str) -> Option<&Vn<G>> {
        match self.roles.get(id) {
            Some(Role::Vn(v)) => Some(v),
            _ => None,
        }
    }

    /// The chain as held by `vn`.
    pub fn chain(&self, vn: &str) -> Option<&Chain> {
        self.vn(vn).map(|v| v.chain())
    }

    pub fn chain_path(&self, vn: &str) -> Option<PathBuf> {
        self.shared.config.data_dir.as_ref().map(|d| d.join(format!("{vn}.chain")))
    }

    /// Every proof bundle `vn` received for `query_id`.
    pub fn vn_bundles(&self, vn: &str, query_id: &str) -> &[ProofBundle] {
        self.vn(vn).map_or(&[], |v| v.bundles(query_id))
    }

    pub fn role(&self, id: &str) -> Option<&Role<G>> {
        self.roles.get(id)
    }

    /// Counters summed over every role since the system was built.
    pub fn role_stats(&self) -> RoleStats {
        let mut t = RoleStats::default();
        for r in self.roles.values() {
            let s = r.stats();
            t.bundles_sent += s.bundles_sent;
            t.sub_proofs_sent += s.sub_proofs_sent;
            t.bundles_received += s.bundles_received;
            t.sub_proofs_checked += s.sub_proofs_checked;
            t.rejected_frames += s.rejected_frames;
        }
        t
    }

    /// Audits `query_id` against the chain of the first VN.
    pub fn audit(&self, query_id: &str) -> Result<AuditReport, HarnessError> {
        let vn = &self.shared.vns[0];
        let chain = self.chain(vn).expect("VNs exist");
        Ok(audit(&chain.to_bytes(), query_id, &self.shared.vn_keys, self.shared.policy.f_h)?)
    }

    fn unique_id(&self, query: &Query) -> String {
        let taken = |id: &str| {
            self.issued.contains(id)
                || self.shared.vns.iter().any(|v| self.chain(v).is_some_and(|c| c.find(id).is_some()))
        };
        if !taken(&query.id) {
            return query.id.clone();
        }
        (1..).map(|i| format!("{}-{i}", query.id)).find(|id| !taken(id)).expect("unbounded")
    }

    pub fn run_query(&mut self, query: &Query) -> Result<QueryOutcome, HarnessError> {
        self.run_query_traced(query, |_| {})
    }

    /// Validates `query`, gives it an unused id and has the querier
    /// broadcast it. Returns the first messages and timers.
    pub fn start_query(&mut self, query: &Query) -> Result<Outputs, HarnessError> {
        query.validate()?;
        if let Some(dp) = query.dps.iter().find(|d| !self.shared.dp_cn.contains_key(*d)) {
            return Err(HarnessError::Invalid(format!("unknown data provider {dp}")));
        }
        let query = query.clone().with_id(self.unique_id(query));
        self.issued.insert(query.id.clone());
        let shared = Arc::clone(&self.shared);
        let Some(Role::Querier(querier)) = self.roles.get_mut(&shared.config.querier.id) else {
            unreachable!("the querier is always built");
        };
        Ok(querier.start(query, &shared))
    }

    pub(crate) fn roles_mut(&mut self, ids: &BTreeSet<String>) -> Vec<&mut Role<G>> {
        self.roles
            .iter_mut()
            .filter(|(id, _)| ids.contains(*id))
            .map(|(_, r)| r)
            .collect()
    }

    /// Runs `query` to completion. `tap` sees every delivered message under
    /// the serial scheduler.
    pub fn run_query_traced(&mut self, query: &Query, tap: impl FnMut(&Message)) -> Result<QueryOutcome, HarnessError> {
        let initial = self.start_query(query)?;
        let shared = Arc::clone(&self.shared);
        let stats = match shared.config.scheduler {
            Scheduler::Serial => run_serial(&mut self.roles, &shared, initial, tap),
            Scheduler::Concurrent => run_threaded(&mut self.roles, &self.hosts, &shared, initial),
        };
        let Some(Role::Querier(querier)) = self.roles.get(&shared.config.querier.id) else {
            unreachable!();
        };
        let result = querier
            .outcome()
            .ok_or_else(|| HarnessError::Invalid("the query did not finish".into()))?;
        Ok(QueryOutcome { result, stats })
    }

    /// Min or max of `query`'s attribute over its RANGE by halving the
    /// range with OR sub-queries before one range-vector query of width at
    /// most about `el`.
    pub fn run_iterative_extreme(&mut self, query: &Query, el: u64) -> Result<ExtremeOutcome, HarnessError> {
        let op = &query.operation;
        let maximize = match op.kind {
            OperationKind::Max => true,
            OperationKind::Min => false,
            _ => return Err(HarnessError::Invalid("iterative extreme needs min or max".into())),
        };
        let (lo, hi) = op
            .bounds
            .ok_or_else(|| HarnessError::Invalid("iterative extreme needs RANGE".into()))?;
        let outcome = iterative_extreme(lo, hi, el, maximize, |step| {
            let mut sub = query.clone();
            let (kind, lo, hi) = match step {
                ExtremeStep::Exists { lo, hi } => (OperationKind::Or, lo, hi),
                ExtremeStep::Extreme { lo, hi, .. } => (op.kind, lo, hi),
            };
            sub.operation.kind = kind;
            sub.operation.bounds = Some((lo, hi));
            sub.id = format!("{}/{}[{lo},{hi})", query.id, kind.name());
            let out = self.run_query(&sub)?;
            Ok::<_, HarnessError>(out.value()?.values[0].round() as i64)
        })
        .map_err(|e| HarnessError::Invalid(e.to_string()))?;
        outcome
    }
}

/// A [`System`] over whichever group the configuration names.
pub enum AnySystem {
    Ristretto(System<Ristretto>),
    Bn254(System<Bn254>),
}

macro_rules! each {
    ($s:expr, $v:ident => $e:expr) => {
        match $s {
            AnySystem::Ristretto($v) => $e,
            AnySystem::Bn254($v) => $e,
        }
    };
}

impl AnySystem {
    pub fn new(config: Config, tables: BTreeMap<String, Table>) -> Result<Self, HarnessError> {
        Ok(match config.profile {
            Profile::Ristretto => AnySystem::Ristretto(System::new(config, tables)?),
            Profile::Bn254 => AnySystem::Bn254(System::new(config, tables)?),
        })
    }

    pub fn from_config(config: Config) -> Result<Self, HarnessError> {
        Self::new(config, BTreeMap::new())
    }

    pub fn config(&self) -> &Config {
        each!(self, s => s.config())
    }

    pub fn run_query(&mut self, query: &Query) -> Result<QueryOutcome, HarnessError> {
        each!(self, s => s.run_query(query))
    }

    pub fn run_iterative_extreme(&mut self, query: &Query, el: u64) -> Result<ExtremeOutcome, HarnessError> {
        each!(self, s => s.run_iterative_extreme(query, el))
    }

    pub fn audit(&self, query_id: &str) -> Result<AuditReport, HarnessError> {
        each!(self, s => s.audit(query_id))
    }

    pub fn role_stats(&self) -> RoleStats {
        each!(self, s => s.role_stats())
    }

    /// Runs `query` as the querier against nodes in other processes.
    pub fn run_remote_query(&mut self, query: &Query) -> Result<QueryOutcome, HarnessError> {
        each!(self, s => crate::tcp::run_remote_query(s, query))
    }

    /// Serves `ids` over their configured addresses.
    pub fn host(self, ids: &[String]) -> Result<crate::tcp::NodeHost, HarnessError> {
        each!(self, s => crate::tcp::NodeHost::spawn(s, ids))
    }

    pub fn colocate(&mut self, hosts: Vec<Vec<String>>) {
        each!(self, s => s.colocate(hosts))
    }

    pub fn public_keys(&self) -> crate::keys::PublicKeys {
        each!(self, s => s.keys().public_summary())
    }
}
