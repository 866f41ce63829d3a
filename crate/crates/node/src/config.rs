//! TOML configuration: topology, curve profile, verification thresholds,
//! timeouts, network model and default privacy parameters.
//!
//! ```toml
//! profile = "ristretto"          # or "bn254" (needed for range proofs)
//! seed = 42                      # derive all keys and node RNGs from this
//! scheduler = "serial"           # or "concurrent"
//! dlog_max = 1099511627776
//!
//! [verification]
//! t = 1.0
//! t_sub = 0.3
//!
//! [[cn]]
//! id = "cn0"
//! addr = "127.0.0.1:7100"
//!
//! [[dp]]
//! id = "dp0"
//! cn = "cn0"
//! data = "data/dp0.csv"
//!
//! [[vn]]
//! id = "vn0"
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use veriquery::group::Profile;
use veriquery::ledger::{default_f_h, VerificationPolicy};
use veriquery::protocols::PrivacyParams;
use veriquery::zkp::range::DEFAULT_BASE;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheduler {
    /// Discrete-event simulation on one thread; deterministic.
    #[default]
    Serial,
    /// One thread per node, real time.
    Concurrent,
}

/// Injected misbehaviour, for tests and experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// The node ignores every message.
    Offline,
    /// A DP replaces its first encoded entry with a value above the query
    /// range and proves it anyway.
    OutOfRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub id: String,
    #[serde(default)]
    pub addr: Option<String>,
    #[serde(default)]
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpEntry {
    pub id: String,
    pub cn: String,
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub addr: Option<String>,
    #[serde(default)]
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationSettings {
    pub t: f64,
    pub t_sub: f64,
    #[serde(default)]
    pub f_h: Option<usize>,
}

impl Default for VerificationSettings {
    fn default() -> Self {
        VerificationSettings {
            t: 1.0,
            t_sub: 1.0,
            f_h: None,
        }
    }
}

/// Timeouts in milliseconds (simulated for the serial scheduler).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Timeouts {
    /// How long a CN waits for its DPs before aggregating without them.
    pub dp_ms: u64,
    /// How long a CN waits for its children before aborting the query.
    pub cn_ms: u64,
    /// How long VNs wait for maps and signatures.
    pub vn_ms: u64,
}

impl Default for Timeouts {
    fn default() -> Self {
        Timeouts {
            dp_ms: 5_000,
            cn_ms: 30_000,
            vn_ms: 30_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Network {
    pub latency_ms: f64,
    pub bandwidth_mbps: f64,
}

impl Default for Network {
    fn default() -> Self {
        Network {
            latency_ms: 1.0,
            bandwidth_mbps: 100.0,
        }
    }
}

impl Network {
    /// Simulated transfer time of a message.
    pub fn delay_ms(&self, bytes: usize) -> f64 {
        self.latency_ms + bytes as f64 * 8.0 / (self.bandwidth_mbps * 1_000.0)
    }
}

fn default_profile() -> Profile {
    Profile::Ristretto
}

fn default_dlog() -> u64 {
    1 << 40
}

fn default_base() -> u64 {
    DEFAULT_BASE
}

fn default_rounds() -> usize {
    veriquery::zkp::shuffle::DEFAULT_ROUNDS
}

fn default_querier() -> NodeEntry {
    NodeEntry {
        id: "q".into(),
        addr: None,
        fault: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_profile")]
    pub profile: Profile,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub scheduler: Scheduler,
    /// Largest plaintext magnitude the querier decrypts.
    #[serde(default = "default_dlog")]
    pub dlog_max: u64,
    /// Size of the baby-step table; defaults to about `sqrt(dlog_max)`,
    /// capped at `2^20`.
    #[serde(default)]
    pub dlog_baby_steps: Option<u64>,
    /// Fixed-point scale for queries issued from this config; `None` keeps
    /// the default of each operation.
    #[serde(default)]
    pub scale: Option<i64>,
    #[serde(default = "default_base")]
    pub range_base: u64,
    #[serde(default = "default_rounds")]
    pub shuffle_rounds: usize,
    #[serde(default)]
    pub verification: VerificationSettings,
    #[serde(default)]
    pub timeouts: Timeouts,
    #[serde(default)]
    pub network: Network,
    #[serde(default)]
    pub privacy: Option<PrivacyParams>,
    /// Where VNs keep their chain files.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    #[serde(default = "default_querier")]
    pub querier: NodeEntry,
    #[serde(default)]
    pub cn: Vec<NodeEntry>,
    #[serde(default)]
    pub dp: Vec<DpEntry>,
    #[serde(default)]
    pub vn: Vec<NodeEntry>,
}

impl Config {
    /// `n_cn` CNs, `n_dp` DPs assigned round-robin, `n_vn` VNs.
    pub fn local(n_cn: usize, n_dp: usize, n_vn: usize) -> Self {
        Config {
            profile: Profile::Ristretto,
            seed: Some(0),
            scheduler: Scheduler::Serial,
            dlog_max: default_dlog(),
            dlog_baby_steps: None,
            scale: None,
            range_base: DEFAULT_BASE,
            shuffle_rounds: default_rounds(),
            verification: VerificationSettings::default(),
            timeouts: Timeouts::default(),
            network: Network::default(),
            privacy: None,
            data_dir: None,
            querier: default_querier(),
            cn: (0..n_cn)
                .map(|i| NodeEntry {
                    id: format!("cn{i}"),
                    addr: None,
                    fault: None,
                })
                .collect(),
            dp: (0..n_dp)
                .map(|i| DpEntry {
                    id: format!("dp{i}"),
                    cn: format!("cn{}", i % n_cn.max(1)),
                    data: None,
                    addr: None,
                    fault: None,
                })
                .collect(),
            vn: (0..n_vn)
                .map(|i| NodeEntry {
                    id: format!("vn{i}"),
                    addr: None,
                    fault: None,
                })
                .collect(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: Config = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    /// Loads a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut c = Config::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for dp in &mut c.dp {
            if let Some(d) = &dp.data {
                if d.is_relative() {
                    dp.data = Some(base.join(d));
                }
            }
        }
        if let Some(d) = &c.data_dir {
            if d.is_relative() {
                c.data_dir = Some(base.join(d));
            }
        }
        Ok(c)
    }

    pub fn policy(&self) -> VerificationPolicy {
        let n = self.vn.len();
        VerificationPolicy {
            t: self.verification.t,
            t_sub: self.verification.t_sub,
            f_h: self.verification.f_h.unwrap_or_else(|| default_f_h(n)),
            n_vn: n,
        }
    }

    pub fn fault(&self, id: &str) -> Option<Fault> {
        self.cn
            .iter()
            .chain(&self.vn)
            .find(|n| n.id == id)
            .and_then(|n| n.fault)
            .or_else(|| self.dp.iter().find(|d| d.id == id).and_then(|d| d.fault))
    }

    pub fn cn_ids(&self) -> Vec<String> {
        self.cn.iter().map(|n| n.id.clone()).collect()
    }

    pub fn vn_ids(&self) -> Vec<String> {
        self.vn.iter().map(|n| n.id.clone()).collect()
    }

    pub fn dp_ids(&self) -> Vec<String> {
        self.dp.iter().map(|n| n.id.clone()).collect()
    }

    /// All node identities with their addresses.
    pub fn addresses(&self) -> Vec<(String, Option<String>)> {
        std::iter::once((self.querier.id.clone(), self.querier.addr.clone()))
            .chain(self.cn.iter().map(|n| (n.id.clone(), n.addr.clone())))
            .chain(self.dp.iter().map(|n| (n.id.clone(), n.addr.clone())))
            .chain(self.vn.iter().map(|n| (n.id.clone(), n.addr.clone())))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.cn.is_empty() || self.vn.is_empty() {
            return bad("need at least one CN and one VN".into());
        }
        let mut seen = BTreeSet::new();
        for (id, _) in self.addresses() {
            if id.is_empty() || !seen.insert(id.clone()) {
                return bad(format!("duplicate or empty node id '{id}'"));
            }
        }
        let cns: BTreeSet<&String> = self.cn.iter().map(|c| &c.id).collect();
        for dp in &self.dp {
            if !cns.contains(&dp.cn) {
                return bad(format!("{} is assigned to unknown CN {}", dp.id, dp.cn));
            }
        }
        if let Err(e) = self.policy().validate() {
            return bad(e.to_string());
        }
        if self.dlog_max == 0 || self.shuffle_rounds == 0 || self.dlog_baby_steps == Some(0) {
            return bad("dlog_max and shuffle_rounds must be positive".into());
        }
        if self.scale.is_some_and(|s| s <= 0) {
            return bad("scale must be positive".into());
        }
        if let Some(p) = &self.privacy {
            if let Err(e) = p.validate() {
                return bad(e.to_string());
            }
        }
        Ok(())
    }
}
