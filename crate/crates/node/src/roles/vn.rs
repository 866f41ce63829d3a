use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use rand_chacha::ChaCha20Rng;
use veriquery::group::Group;
use veriquery::ledger::{
    expected_proofs, probabilistic_verify, Block, Chain, ProofBundle, QueryProofsMap, Status, VerifyContext,
};
use veriquery::query::Query;
use veriquery::sign::{self, SigningKey};
use veriquery::wire::Decode;
use veriquery::zkp::range::range_params;

use super::{BlockInfo, Outbox, QueryRequest, RoleStats, Shared, Timer};
use crate::frame::{Message, Round};

struct Leading {
    maps: BTreeMap<String, QueryProofsMap>,
    maps_timed_out: bool,
    block: Option<Block>,
    waiting: BTreeSet<String>,
    sigs_timed_out: bool,
    done: bool,
}

struct VnQuery<G: Group> {
    query: Query,
    ctx: VerifyContext<G>,
    map: QueryProofsMap,
    /// The querier is done; close once every expected proof is in.
    closing: bool,
    closed: bool,
    bundles: Vec<ProofBundle>,
}

pub struct Vn<G: Group> {
    pub(crate) id: String,
    pub(crate) key: SigningKey,
    pub(crate) stats: RoleStats,
    rng: ChaCha20Rng,
    chain: Chain,
    chain_path: Option<PathBuf>,
    queries: BTreeMap<String, VnQuery<G>>,
    leading: BTreeMap<String, Leading>,
    early: BTreeMap<String, Vec<ProofBundle>>,
}

impl<G: Group> Vn<G> {
    pub fn new(id: String, key: SigningKey, rng: ChaCha20Rng, chain: Chain, chain_path: Option<PathBuf>) -> Self {
        Vn {
            id,
            key,
            stats: RoleStats::default(),
            rng,
            chain,
            chain_path,
            queries: BTreeMap::new(),
            leading: BTreeMap::new(),
            early: BTreeMap::new(),
        }
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    /// Every bundle received for `query_id`, in arrival order.
    pub fn bundles(&self, query_id: &str) -> &[ProofBundle] {
        self.queries.get(query_id).map_or(&[], |q| &q.bundles)
    }

    pub fn map(&self, query_id: &str) -> Option<&QueryProofsMap> {
        self.queries.get(query_id).map(|q| &q.map)
    }

    pub(crate) fn handle(&mut self, msg: Message, shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        let qid = msg.query_id.clone();
        let from_querier = msg.sender == shared.config.querier.id;
        match msg.round {
            Round::QueryRequest if from_querier && !self.queries.contains_key(&qid) => self.start(&msg, shared),
            Round::Proof => match ProofBundle::from_bytes(&msg.payload) {
                Ok(b) if b.query_id == qid && b.prover == msg.sender => {
                    self.on_bundle(b, shared);
                    if self.queries.get(&qid).is_some_and(|q| q.closing && q.map.count(Status::NotReceived) == 0) {
                        self.close(&qid, shared, out);
                    }
                }
                _ => log::warn!("{}: malformed proof bundle from {}", self.id, msg.sender),
            },
            Round::QueryDone if from_querier => self.on_done(&qid, shared, out),
            Round::Map => self.on_map(&qid, &msg, shared, out),
            Round::BlockProposal => self.on_proposal(&qid, &msg, shared, out),
            Round::BlockSig => self.on_sig(&qid, &msg, shared, out),
            Round::BlockCommit => self.on_commit(&msg, shared),
            Round::Timer if Timer::from_bytes(&msg.payload) == Some(Timer::CloseWait) => self.close(&qid, shared, out),
            Round::Timer => {
                let Some(l) = self.leading.get_mut(&qid) else {
                    return;
                };
                match Timer::from_bytes(&msg.payload) {
                    Some(Timer::MapWait) => l.maps_timed_out = true,
                    Some(Timer::SigWait) => l.sigs_timed_out = true,
                    _ => return,
                }
                self.progress(&qid, shared, out);
            }
            _ => {}
        }
    }

    fn start(&mut self, msg: &Message, shared: &Shared<G>) {
        let Some((query, querier_key)) = QueryRequest::parse::<G>(&msg.payload) else {
            return;
        };
        let expected = match expected_proofs(&query, shared.tree.nodes(), shared.range.is_some()) {
            Ok(e) => e,
            Err(e) => {
                log::warn!("{}: cannot track {}: {e}", self.id, query.id);
                return;
            }
        };
        let range = match (&shared.range, query.operation.entry_bounds()) {
            (Some(sigs), Some((lo, hi))) => range_params(lo, hi, sigs.u).ok().map(|p| (sigs.clone(), p)),
            _ => None,
        };
        let ctx = VerifyContext {
            collective_key: shared.collective,
            querier_key,
            cn_keys: shared.cn_public.clone(),
            range,
            signers: shared.verifying.clone(),
        };
        let qid = query.id.clone();
        self.queries.insert(
            qid.clone(),
            VnQuery {
                query,
                ctx,
                map: QueryProofsMap::new(&expected),
                closing: false,
                closed: false,
                bundles: Vec::new(),
            },
        );
        for b in self.early.remove(&qid).unwrap_or_default() {
            self.on_bundle(b, shared);
        }
    }

    fn on_bundle(&mut self, b: ProofBundle, shared: &Shared<G>) {
        let Some(q) = self.queries.get_mut(&b.query_id) else {
            self.early.entry(b.query_id.clone()).or_default().push(b);
            return;
        };
        if q.closed {
            return;
        }
        self.stats.bundles_received += 1;
        let outcome = probabilistic_verify(&q.ctx, &b, &shared.policy, &mut self.rng);
        self.stats.sub_proofs_checked += outcome.checked;
        if !q.map.record(&b.key(), outcome.status) {
            log::warn!("{}: unexpected {} proof from {}", self.id, b.proof_type.name(), b.prover);
        }
        q.bundles.push(b);
    }

    fn leader<'a>(&self, shared: &'a Shared<G>) -> &'a str {
        self.chain.leader(&shared.vns)
    }

    fn on_done(&mut self, qid: &str, shared: &Shared<G>, out: &mut Outbox<'_>) {
        let Some(q) = self.queries.get_mut(qid).filter(|q| !q.closing) else {
            return;
        };
        q.closing = true;
        if q.map.count(Status::NotReceived) == 0 {
            self.close(qid, shared, out);
        } else {
            out.timer(qid, shared.config.timeouts.vn_ms, Timer::CloseWait);
        }
    }

    fn close(&mut self, qid: &str, shared: &Shared<G>, out: &mut Outbox<'_>) {
        let Some(q) = self.queries.get_mut(qid).filter(|q| !q.closed) else {
            return;
        };
        q.closed = true;
        let map = q.map.clone();
        let leader = self.leader(shared).to_string();
        if leader != self.id {
            out.send(qid, Round::Map, &leader, serde_json::to_vec(&map).expect("map serializes"));
            return;
        }
        let me = self.id.clone();
        self.leading_state(qid).maps.insert(me, map);
        out.timer(qid, shared.config.timeouts.vn_ms, Timer::MapWait);
        self.progress(qid, shared, out);
    }

    fn leading_state(&mut self, qid: &str) -> &mut Leading {
        self.leading.entry(qid.to_string()).or_insert_with(|| Leading {
            maps: BTreeMap::new(),
            maps_timed_out: false,
            block: None,
            waiting: BTreeSet::new(),
            sigs_timed_out: false,
            done: false,
        })
    }

    fn on_map(&mut self, qid: &str, msg: &Message, shared: &Shared<G>, out: &mut Outbox<'_>) {
        if self.leader(shared) != self.id || !shared.vns.contains(&msg.sender) {
            return;
        }
        let Ok(map) = serde_json::from_slice::<QueryProofsMap>(&msg.payload) else {
            return;
        };
        let l = self.leading_state(qid);
        if l.block.is_none() {
            l.maps.insert(msg.sender.clone(), map);
        }
        self.progress(qid, shared, out);
    }

    /// Proposes once every map is in (or the wait expired) and commits once
    /// every VN answered (or the wait expired).
    fn progress(&mut self, qid: &str, shared: &Shared<G>, out: &mut Outbox<'_>) {
        let Some(q) = self.queries.get(qid).filter(|q| q.closed) else {
            return;
        };
        let own = q.map.clone();
        let query = q.query.clone();
        let me = self.id.clone();
        let Some(l) = self.leading.get_mut(qid).filter(|l| !l.done) else {
            return;
        };
        if l.block.is_none() {
            if l.maps.len() < shared.vns.len() && !l.maps_timed_out {
                return;
            }
            let mut block = self.chain.propose(&query, l.maps.clone(), &shared.vns);
            if block.endorsed_by(&me, &own) {
                block.sign(&me, &self.key);
            }
            l.waiting = shared.vns.iter().filter(|v| **v != me).cloned().collect();
            out.send_all(qid, Round::BlockProposal, &l.waiting, &block.to_bytes());
            if !l.waiting.is_empty() {
                out.timer(qid, shared.config.timeouts.vn_ms, Timer::SigWait);
            }
            l.block = Some(block);
        }
        if !l.waiting.is_empty() && !l.sigs_timed_out {
            return;
        }
        l.done = true;
        let block = l.block.clone().expect("proposed");
        let signatures = block.check_signatures(&shared.vn_keys).0.len();
        let mut info = BlockInfo {
            committed: false,
            height: block.body.height,
            hash: block.hash(),
            signatures,
            reason: None,
        };
        match self.chain.append(block.clone(), &shared.vn_keys, shared.policy.f_h) {
            Ok(()) => {
                info.committed = true;
                self.persist();
                let others: Vec<String> = shared.vns.iter().filter(|v| **v != me).cloned().collect();
                out.send_all(qid, Round::BlockCommit, &others, &block.to_bytes());
            }
            Err(e) => {
                log::warn!("{me}: block for {qid} not committed: {e}");
                info.reason = Some(e.to_string());
            }
        }
        out.send(
            qid,
            Round::BlockDone,
            &shared.config.querier.id,
            serde_json::to_vec(&info).expect("info serializes"),
        );
    }

    fn on_proposal(&mut self, qid: &str, msg: &Message, shared: &Shared<G>, out: &mut Outbox<'_>) {
        if msg.sender != self.leader(shared) {
            return;
        }
        let Ok(mut block) = Block::from_bytes(&msg.payload) else {
            return;
        };
        let b = &block.body;
        let acceptable = self.queries.get(qid).is_some_and(|q| q.closed && block.endorsed_by(&self.id, &q.map))
            && b.query_id == qid
            && b.leader == msg.sender
            && b.prev_hash == self.chain.head_hash()
            && b.height == self.chain.height();
        let sig = if acceptable {
            block.sign(&self.id, &self.key);
            block.signatures.last().expect("just signed").1.clone()
        } else {
            log::warn!("{}: refusing to sign the block for {qid}", self.id);
            Vec::new()
        };
        out.send(qid, Round::BlockSig, &msg.sender, sig);
    }

    fn on_sig(&mut self, qid: &str, msg: &Message, shared: &Shared<G>, out: &mut Outbox<'_>) {
        let Some(l) = self.leading.get_mut(qid) else {
            return;
        };
        let Some(block) = l.block.as_mut() else {
            return;
        };
        if l.done || !l.waiting.remove(&msg.sender) {
            return;
        }
        let valid = shared
            .vn_keys
            .get(&msg.sender)
            .is_some_and(|k| sign::verify(k, veriquery::ledger::BLOCK_DOMAIN, block.hash().as_bytes(), &msg.payload));
        if valid {
            block.signatures.push((msg.sender.clone(), msg.payload.clone()));
        }
        self.progress(qid, shared, out);
    }

    fn on_commit(&mut self, msg: &Message, shared: &Shared<G>) {
        let Ok(block) = Block::from_bytes(&msg.payload) else {
            return;
        };
        if block.body.leader != msg.sender {
            return;
        }
        match self.chain.append(block, &shared.vn_keys, shared.policy.f_h) {
            Ok(()) => self.persist(),
            Err(e) => log::warn!("{}: rejecting committed block from {}: {e}", self.id, msg.sender),
        }
    }

    fn persist(&self) {
        if let Some(p) = &self.chain_path {
            if let Err(e) = self.chain.save(p) {
                log::error!("{}: cannot write {}: {e}", self.id, p.display());
            }
        }
    }
}
