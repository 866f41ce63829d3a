//! Role state machines. Each role consumes one [`Message`] at a time and
//! emits messages and timers through an [`Outbox`]; the runtimes decide
//! how and when they are delivered.

mod cn;
mod dp;
mod querier;
mod vn;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use veriquery::elgamal::{decode_ciphertexts, encode_ciphertexts, Ciphertext};
use veriquery::group::Group;
use veriquery::ledger::{ProofBundle, VerificationPolicy};
use veriquery::protocols::CnTree;
use veriquery::query::Query;
use veriquery::sign::{SigningKey, VerifyingKey};
use veriquery::wire::{Encode, Reader, WireError, Writer};
use veriquery::zkp::range::RangeSignatures;

pub use self::cn::Cn;
pub use self::dp::Dp;
pub use self::querier::{BlockInfo, Querier, QueryFailure, QueryResult};
pub use self::vn::Vn;

use crate::config::Config;
use crate::frame::{Message, Round};

/// Public setup every node knows.
#[derive(Debug)]
pub struct Shared<G: Group> {
    pub config: Config,
    pub tree: CnTree,
    pub vns: Vec<String>,
    pub dp_cn: BTreeMap<String, String>,
    pub verifying: BTreeMap<String, VerifyingKey>,
    pub vn_keys: BTreeMap<String, VerifyingKey>,
    pub cn_public: BTreeMap<String, G::Point>,
    pub collective: G::Point,
    pub range: Option<RangeSignatures<G>>,
    pub policy: VerificationPolicy,
}

impl<G: Group> Shared<G> {
    pub fn range_active(&self, q: &Query) -> bool {
        self.range.is_some() && q.operation.entry_bounds().is_some()
    }
}

/// Messages and timers produced while handling one message.
pub struct Outbox<'a> {
    me: &'a str,
    key: &'a SigningKey,
    pub messages: Vec<Message>,
    /// `(delay in ms, timer message)`.
    pub timers: Vec<(u64, Message)>,
}

impl<'a> Outbox<'a> {
    pub fn new(me: &'a str, key: &'a SigningKey) -> Self {
        Outbox {
            me,
            key,
            messages: Vec::new(),
            timers: Vec::new(),
        }
    }

    pub fn send(&mut self, qid: &str, round: Round, to: &str, payload: Vec<u8>) {
        let mut m = Message::new(qid, round, self.me, to, payload);
        m.sign(self.key);
        self.messages.push(m);
    }

    pub fn send_all<'b>(&mut self, qid: &str, round: Round, to: impl IntoIterator<Item = &'b String>, payload: &[u8]) {
        for r in to {
            self.send(qid, round, r, payload.to_vec());
        }
    }

    pub fn timer(&mut self, qid: &str, delay_ms: u64, tag: Timer) {
        let m = Message::new(qid, Round::Timer, self.me, self.me, tag.to_bytes());
        self.timers.push((delay_ms, m));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Timer {
    /// A CN stops waiting for its DPs.
    DpWait,
    /// A CN gives up on a child's partial aggregate.
    ChildWait,
    /// A CN gives up on a tree round.
    RoundWait(RoundKind),
    /// The querier gives up on the whole query.
    QueryWait,
    /// The leader stops waiting for maps.
    MapWait,
    /// The leader stops waiting for block signatures.
    SigWait,
    /// A VN stops waiting for proofs after the query finished.
    CloseWait,
}

impl Timer {
    fn to_bytes(self) -> Vec<u8> {
        match self {
            Timer::DpWait => vec![0],
            Timer::ChildWait => vec![1],
            Timer::RoundWait(k) => vec![2, k as u8],
            Timer::QueryWait => vec![3],
            Timer::MapWait => vec![4],
            Timer::SigWait => vec![5],
            Timer::CloseWait => vec![6],
        }
    }

    fn from_bytes(b: &[u8]) -> Option<Self> {
        Some(match b {
            [0] => Timer::DpWait,
            [1] => Timer::ChildWait,
            [2, k] => Timer::RoundWait(RoundKind::from_u8(*k)?),
            [3] => Timer::QueryWait,
            [4] => Timer::MapWait,
            [5] => Timer::SigWait,
            [6] => Timer::CloseWait,
            _ => return None,
        })
    }
}

/// The two collective rounds that walk the CN tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundKind {
    Obfuscation = 1,
    KeySwitch = 2,
}

impl RoundKind {
    fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(RoundKind::Obfuscation),
            2 => Some(RoundKind::KeySwitch),
            _ => None,
        }
    }
}

/// What Q broadcasts: the query and the key the result is switched to.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct QueryRequest {
    query: Query,
    querier_key: String,
}

impl QueryRequest {
    fn new<G: Group>(query: &Query, key: &G::Point) -> Vec<u8> {
        serde_json::to_vec(&QueryRequest {
            query: query.clone(),
            querier_key: hex::encode(G::encode_point(key)),
        })
        .expect("query serializes")
    }

    fn parse<G: Group>(payload: &[u8]) -> Option<(Query, G::Point)> {
        let r: QueryRequest = serde_json::from_slice(payload).ok()?;
        let key = G::decode_point(&hex::decode(&r.querier_key).ok()?).ok()?;
        Some((r.query, key))
    }
}

fn cts_payload<G: Group>(tag: u8, cts: &[Ciphertext<G>]) -> Vec<u8> {
    let mut w = Writer::new();
    w.u8(tag);
    encode_ciphertexts(&mut w, cts);
    w.into_bytes()
}

fn parse_cts<G: Group>(payload: &[u8]) -> Result<(u8, Vec<Ciphertext<G>>), WireError> {
    let mut r = Reader::new(payload);
    let tag = r.u8()?;
    let cts = decode_ciphertexts(&mut r)?;
    r.finish()?;
    Ok((tag, cts))
}

fn send_bundle(out: &mut Outbox<'_>, vns: &[String], bundle: &ProofBundle) {
    out.send_all(&bundle.query_id, Round::Proof, vns, &bundle.to_bytes());
}

/// Counters a role reports after a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoleStats {
    pub bundles_sent: usize,
    pub sub_proofs_sent: usize,
    pub bundles_received: usize,
    pub sub_proofs_checked: usize,
    pub rejected_frames: usize,
}

/// Any node role.
pub enum Role<G: Group> {
    Querier(Box<Querier<G>>),
    Cn(Box<Cn<G>>),
    Dp(Box<Dp<G>>),
    Vn(Box<Vn<G>>),
}

impl<G: Group> Role<G> {
    pub fn id(&self) -> &str {
        match self {
            Role::Querier(r) => &r.id,
            Role::Cn(r) => &r.id,
            Role::Dp(r) => &r.id,
            Role::Vn(r) => &r.id,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Role::Querier(_) => "querier",
            Role::Cn(_) => "cn",
            Role::Dp(_) => "dp",
            Role::Vn(_) => "vn",
        }
    }

    pub fn signing_key(&self) -> &SigningKey {
        match self {
            Role::Querier(r) => &r.key,
            Role::Cn(r) => &r.key,
            Role::Dp(r) => &r.key,
            Role::Vn(r) => &r.key,
        }
    }

    /// Handles one message. Frames whose signature does not match the
    /// claimed sender are dropped.
    pub fn handle(&mut self, msg: Message, shared: &Arc<Shared<G>>) -> (Vec<Message>, Vec<(u64, Message)>) {
        let authentic = if msg.round == Round::Timer {
            msg.sender == self.id()
        } else {
            shared.verifying.get(&msg.sender).is_some_and(|k| msg.verify(k))
        };
        if !authentic {
            log::warn!("{}: dropping unauthenticated {:?} from {}", self.id(), msg.round, msg.sender);
            self.stats_mut().rejected_frames += 1;
            return (Vec::new(), Vec::new());
        }
        let (id, key) = (self.id().to_string(), self.signing_key().clone());
        let mut out = Outbox::new(&id, &key);
        match self {
            Role::Querier(r) => r.handle(msg, shared, &mut out),
            Role::Cn(r) => r.handle(msg, shared, &mut out),
            Role::Dp(r) => r.handle(msg, shared, &mut out),
            Role::Vn(r) => r.handle(msg, shared, &mut out),
        }
        (out.messages, out.timers)
    }

    pub fn stats(&self) -> &RoleStats {
        match self {
            Role::Querier(r) => &r.stats,
            Role::Cn(r) => &r.stats,
            Role::Dp(r) => &r.stats,
            Role::Vn(r) => &r.stats,
        }
    }

    fn stats_mut(&mut self) -> &mut RoleStats {
        match self {
            Role::Querier(r) => &mut r.stats,
            Role::Cn(r) => &mut r.stats,
            Role::Dp(r) => &mut r.stats,
            Role::Vn(r) => &mut r.stats,
        }
    }

    /// Sets the injected fault of a CN or DP; false for other roles.
    pub(crate) fn set_fault(&mut self, fault: Option<crate::config::Fault>) -> bool {
        match self {
            Role::Cn(r) => r.fault = fault,
            Role::Dp(r) => r.fault = fault,
            _ => return false,
        }
        true
    }

    /// True once the querier holds a final outcome for its current query.
    pub fn finished(&self) -> bool {
        matches!(self, Role::Querier(q) if q.finished())
    }
}
