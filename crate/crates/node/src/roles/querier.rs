use std::sync::Arc;

use serde::{Deserialize, Serialize};
use veriquery::elgamal::{decrypt, decrypts_to_zero, KeyPair};
use veriquery::encodings::{decode, DecodedResult, EncodingError, OperationSpec};
use veriquery::group::{DlogTable, Group};
use veriquery::query::Query;
use veriquery::sign::SigningKey;

use super::{parse_cts, Outbox, QueryRequest, RoleStats, Shared, Timer};
use crate::frame::{Message, Round};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum QueryFailure {
    /// A CN did not answer in time; the query was stopped.
    CnUnavailable(String),
    /// Every DP replied neutral or had no matching record.
    ZeroCount,
    /// The result could not be decrypted or decoded.
    Decode(String),
}

impl std::fmt::Display for QueryFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            QueryFailure::CnUnavailable(m) => write!(f, "computing node unavailable: {m}"),
            QueryFailure::ZeroCount => write!(f, "no records contributed to the result"),
            QueryFailure::Decode(m) => write!(f, "decoding failed: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockInfo {
    pub committed: bool,
    pub height: u64,
    pub hash: String,
    pub signatures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query_id: String,
    pub result: Result<DecodedResult, QueryFailure>,
    pub block: Option<BlockInfo>,
    /// Decrypted aggregate entries before decoding, count last; zero tests
    /// appear as 0 or 1.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aggregate: Vec<i64>,
}

struct Pending {
    query: Query,
    result: Option<Result<DecodedResult, QueryFailure>>,
    aggregate: Vec<i64>,
    block: Option<BlockInfo>,
    done: bool,
}

pub struct Querier<G: Group> {
    pub(crate) id: String,
    pub(crate) key: SigningKey,
    pub(crate) stats: RoleStats,
    elgamal: KeyPair<G>,
    table: Arc<DlogTable<G>>,
    pending: Option<Pending>,
}

impl<G: Group> Querier<G> {
    pub fn new(id: String, key: SigningKey, elgamal: KeyPair<G>, table: Arc<DlogTable<G>>) -> Self {
        Querier {
            id,
            key,
            stats: RoleStats::default(),
            elgamal,
            table,
            pending: None,
        }
    }

    /// Broadcasts `query` to the CNs (which forward it to their DPs) and to
    /// the VNs.
    pub fn start(&mut self, query: Query, shared: &Shared<G>) -> (Vec<Message>, Vec<(u64, Message)>) {
        let (id, key) = (self.id.clone(), self.key.clone());
        let mut out = Outbox::new(&id, &key);
        let req = QueryRequest::new::<G>(&query, self.elgamal.public());
        out.send_all(&query.id, Round::QueryRequest, shared.tree.nodes(), &req);
        out.send_all(&query.id, Round::QueryRequest, &shared.vns, &req);
        let t = shared.config.timeouts;
        out.timer(&query.id, 3 * t.cn_ms + 3 * t.vn_ms, Timer::QueryWait);
        self.pending = Some(Pending {
            query,
            result: None,
            aggregate: Vec::new(),
            block: None,
            done: false,
        });
        (out.messages, out.timers)
    }

    pub fn finished(&self) -> bool {
        self.pending.as_ref().is_some_and(|p| p.done)
    }

    /// The outcome of the last query, once finished.
    pub fn outcome(&self) -> Option<QueryResult> {
        let p = self.pending.as_ref().filter(|p| p.done)?;
        Some(QueryResult {
            query_id: p.query.id.clone(),
            result: p.result.clone()?,
            block: p.block.clone(),
            aggregate: p.aggregate.clone(),
        })
    }

    pub(crate) fn handle(&mut self, msg: Message, shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        let Some(p) = self.pending.as_mut().filter(|p| p.query.id == msg.query_id && !p.done) else {
            return;
        };
        match msg.round {
            Round::Result if msg.sender == shared.tree.root() && p.result.is_none() => {
                // the protocol ran even if decoding fails, so the VNs still seal its proofs
                let op = &p.query.operation;
                p.result = Some(match decrypt_result(op, &msg.payload, &self.elgamal, &self.table) {
                    Ok(v) => {
                        let (count, entries) = v.split_last().expect("count is always present");
                        let decoded = decode(op, entries, *count).map_err(|e| match e {
                            EncodingError::ZeroCount => QueryFailure::ZeroCount,
                            e => QueryFailure::Decode(e.to_string()),
                        });
                        p.aggregate = v;
                        decoded
                    }
                    Err(e) => Err(e),
                });
                out.send_all(&p.query.id, Round::QueryDone, &shared.vns, &[]);
            }
            Round::Abort if p.result.is_none() => {
                let why = String::from_utf8_lossy(&msg.payload).into_owned();
                log::warn!("query {} aborted by {}: {why}", p.query.id, msg.sender);
                p.result = Some(Err(QueryFailure::CnUnavailable(format!("{}: {why}", msg.sender))));
                // the VNs still record which proofs arrived
                out.send_all(&p.query.id, Round::QueryDone, &shared.vns, &[]);
            }
            Round::BlockDone if p.result.is_some() => {
                p.block = serde_json::from_slice(&msg.payload).ok();
                p.done = true;
            }
            Round::Timer if Timer::from_bytes(&msg.payload) == Some(Timer::QueryWait) => {
                if p.result.is_none() {
                    p.result = Some(Err(QueryFailure::CnUnavailable("no result before the deadline".into())));
                }
                p.done = true;
            }
            _ => {}
        }
    }
}

/// Decrypts the entries of the result and, last, the count.
fn decrypt_result<G: Group>(
    op: &OperationSpec,
    payload: &[u8],
    key: &KeyPair<G>,
    table: &DlogTable<G>,
) -> Result<Vec<i64>, QueryFailure> {
    let bad = |m: String| QueryFailure::Decode(m);
    let (_, cts) = parse_cts::<G>(payload).map_err(|e| bad(e.to_string()))?;
    let Some((c, v)) = cts.split_last() else {
        return Err(bad("empty result".into()));
    };
    let mut values = v
        .iter()
        .map(|ct| {
            if op.zero_test_only() {
                Ok(!decrypts_to_zero(ct, key.secret()) as i64)
            } else {
                decrypt(ct, key.secret(), table).map_err(|e| bad(e.to_string()))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    values.push(decrypt(c, key.secret(), table).map_err(|e| bad(e.to_string()))?);
    Ok(values)
}
