use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand_chacha::ChaCha20Rng;
use veriquery::elgamal::{Ciphertext, KeyPair};
use veriquery::encodings::EncodedResponse;
use veriquery::group::Group;
use veriquery::ledger::{aggregation_sub_proofs, ProofBundle, ProofType};
use veriquery::protocols::{
    cdp_apply, cdp_initial, cta_local, ctks_combine, ctks_share, cto_share, quantize_laplace_fixed, KeySwitchShare,
    NoiseList,
};
use veriquery::query::Query;
use veriquery::sign::SigningKey;
use veriquery::wire::{Decode, Encode};
use veriquery::zkp::shuffle::shuffle_and_prove;

use super::{cts_payload, parse_cts, send_bundle, Outbox, QueryRequest, RoleStats, RoundKind, Shared, Timer};
use crate::config::Fault;
use crate::frame::{Message, Round};

const CDP_PASS: u8 = 0;
const CDP_FINAL: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stage {
    Aggregating,
    Obfuscating,
    AwaitingNoise,
    Switching,
    Done,
}

struct TreeRound<G: Group> {
    kind: RoundKind,
    acc: Vec<Ciphertext<G>>,
    waiting: BTreeSet<String>,
    done: bool,
}

struct CnQuery<G: Group> {
    query: Query,
    querier_key: G::Point,
    dps_waiting: BTreeSet<String>,
    dps_closed: bool,
    children_waiting: BTreeSet<String>,
    inputs: Vec<EncodedResponse<G>>,
    aggregated: bool,
    aborted: bool,
    round: Option<TreeRound<G>>,
    // root only
    stage: Stage,
    value: Option<EncodedResponse<G>>,
    noise: Option<Vec<Ciphertext<G>>>,
}

pub struct Cn<G: Group> {
    pub(crate) id: String,
    pub(crate) key: SigningKey,
    pub(crate) stats: RoleStats,
    elgamal: KeyPair<G>,
    pub(crate) fault: Option<Fault>,
    rng: ChaCha20Rng,
    queries: BTreeMap<String, CnQuery<G>>,
    /// Messages that overtook the query broadcast.
    early: BTreeMap<String, Vec<Message>>,
}

impl<G: Group> Cn<G> {
    pub fn new(id: String, key: SigningKey, elgamal: KeyPair<G>, fault: Option<Fault>, rng: ChaCha20Rng) -> Self {
        Cn {
            id,
            key,
            stats: RoleStats::default(),
            elgamal,
            fault,
            rng,
            queries: BTreeMap::new(),
            early: BTreeMap::new(),
        }
    }

    pub(crate) fn handle(&mut self, msg: Message, shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        if self.fault == Some(Fault::Offline) {
            return;
        }
        let qid = msg.query_id.clone();
        if msg.round == Round::QueryRequest {
            if msg.sender == shared.config.querier.id && !self.queries.contains_key(&qid) {
                self.start(msg, shared, out);
                for m in self.early.remove(&qid).unwrap_or_default() {
                    self.handle(m, shared, out);
                }
            }
            return;
        }
        if !self.queries.contains_key(&qid) {
            if msg.round != Round::Timer {
                self.early.entry(qid).or_default().push(msg);
            }
            return;
        }
        if self.queries[&qid].aborted {
            return;
        }
        match msg.round {
            Round::DpResponse => {
                let q = self.queries.get_mut(&qid).expect("checked");
                if q.dps_waiting.remove(&msg.sender) {
                    match EncodedResponse::<G>::from_bytes(&msg.payload) {
                        Ok(r) if r.dimension() == q.query.operation.dimension() => q.inputs.push(r),
                        _ => log::warn!("{}: malformed response from {}", self.id, msg.sender),
                    }
                    q.dps_closed |= q.dps_waiting.is_empty();
                    self.try_aggregate(&qid, shared, out);
                }
            }
            Round::Partial => {
                let q = self.queries.get_mut(&qid).expect("checked");
                if q.children_waiting.remove(&msg.sender) {
                    match EncodedResponse::<G>::from_bytes(&msg.payload) {
                        Ok(r) if r.dimension() == q.query.operation.dimension() => q.inputs.push(r),
                        _ => log::warn!("{}: malformed partial from {}", self.id, msg.sender),
                    }
                    self.try_aggregate(&qid, shared, out);
                }
            }
            Round::RoundRequest if shared.tree.parent(&self.id) == Some(msg.sender.as_str()) => {
                if let Ok((kind, cts)) = parse_cts::<G>(&msg.payload) {
                    if let Some(kind) = RoundKind::from_u8(kind) {
                        self.start_round(&qid, kind, &cts, shared, out);
                    }
                }
            }
            Round::RoundShare => self.on_share(&qid, &msg, shared, out),
            Round::CdpList => self.on_cdp(&qid, &msg, shared, out),
            Round::Timer => self.on_timer(&qid, &msg.payload, shared, out),
            _ => {}
        }
    }

    fn start(&mut self, msg: Message, shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        let Some((query, querier_key)) = QueryRequest::parse::<G>(&msg.payload) else {
            return;
        };
        if query.id != msg.query_id {
            return;
        }
        let qid = query.id.clone();
        let my_dps: BTreeSet<String> = query
            .dps
            .iter()
            .filter(|dp| shared.dp_cn.get(*dp) == Some(&self.id))
            .cloned()
            .collect();
        out.send_all(&qid, Round::QueryRequest, &my_dps, &msg.payload);
        let children: BTreeSet<String> = shared.tree.children(&self.id).into_iter().map(String::from).collect();
        let t = shared.config.timeouts;
        if !my_dps.is_empty() {
            out.timer(&qid, t.dp_ms, Timer::DpWait);
        }
        if !children.is_empty() {
            out.timer(&qid, t.cn_ms, Timer::ChildWait);
        }
        let privacy = query.privacy;
        self.queries.insert(
            qid.clone(),
            CnQuery {
                query,
                querier_key,
                dps_closed: my_dps.is_empty(),
                dps_waiting: my_dps,
                children_waiting: children,
                inputs: Vec::new(),
                aggregated: false,
                aborted: false,
                round: None,
                stage: Stage::Aggregating,
                value: None,
                noise: None,
            },
        );
        if let Some(p) = privacy {
            if shared.tree.nodes().first() == Some(&self.id) {
                match quantize_laplace_fixed(&p, self.queries[&qid].query.operation.scale) {
                    Ok(values) => self.shuffle_step(&qid, cdp_initial::<G>(&values), shared, out),
                    Err(e) => self.abort(&qid, &format!("noise list: {e}"), shared, out),
                }
            }
        }
        self.try_aggregate(&qid, shared, out);
    }

    fn abort(&mut self, qid: &str, why: &str, shared: &Shared<G>, out: &mut Outbox<'_>) {
        if let Some(q) = self.queries.get_mut(qid) {
            if !q.aborted {
                q.aborted = true;
                log::warn!("{}: aborting {qid}: {why}", self.id);
                out.send(qid, Round::Abort, &shared.config.querier.id, why.as_bytes().to_vec());
            }
        }
    }

    fn bundle(&mut self, qid: &str, ty: ProofType, subs: Vec<Vec<u8>>, shared: &Shared<G>, out: &mut Outbox<'_>) {
        self.stats.bundles_sent += 1;
        self.stats.sub_proofs_sent += subs.len();
        let b = ProofBundle::new_signed(qid, &self.id, ty, 0, subs, &self.key);
        send_bundle(out, &shared.vns, &b);
    }

    fn try_aggregate(&mut self, qid: &str, shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        let q = self.queries.get_mut(qid).expect("known query");
        if q.aggregated || !q.dps_closed || !q.children_waiting.is_empty() {
            return;
        }
        q.aggregated = true;
        let d = q.query.operation.dimension();
        let proof = match cta_local(d, std::mem::take(&mut q.inputs)) {
            Ok(p) => p,
            Err(e) => return self.abort(qid, &format!("aggregation: {e}"), shared, out),
        };
        let output = proof.output.clone();
        self.bundle(qid, ProofType::Aggregation, aggregation_sub_proofs(&proof), shared, out);
        match shared.tree.parent(&self.id) {
            Some(parent) => out.send(qid, Round::Partial, parent, output.to_bytes()),
            None => {
                let q = self.queries.get_mut(qid).expect("known query");
                q.value = Some(output);
                self.advance_root(qid, shared, out);
            }
        }
    }

    /// Moves the root through obfuscation, noise and key switching.
    fn advance_root(&mut self, qid: &str, shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        let q = self.queries.get_mut(qid).expect("known query");
        let value = q.value.clone().expect("aggregated");
        match q.stage {
            Stage::Aggregating if q.query.operation.needs_obfuscation() => {
                q.stage = Stage::Obfuscating;
                self.start_round(qid, RoundKind::Obfuscation, &value.v, shared, out);
            }
            Stage::Aggregating | Stage::Obfuscating | Stage::AwaitingNoise => {
                if let Some(p) = q.query.privacy {
                    let Some(list) = q.noise.clone() else {
                        q.stage = Stage::AwaitingNoise;
                        return;
                    };
                    let noise = NoiseList {
                        params: p,
                        scale: q.query.operation.scale,
                        values: Vec::new(),
                        encrypted: list,
                    };
                    match cdp_apply(&value, &noise) {
                        Ok(v) => q.value = Some(v),
                        Err(e) => return self.abort(qid, &format!("noise: {e}"), shared, out),
                    }
                }
                q.stage = Stage::Switching;
                let flat = q.value.as_ref().expect("set").flat();
                self.start_round(qid, RoundKind::KeySwitch, &flat, shared, out);
            }
            Stage::Switching | Stage::Done => {}
        }
    }

    fn start_round(
        &mut self,
        qid: &str,
        kind: RoundKind,
        cts: &[Ciphertext<G>],
        shared: &Arc<Shared<G>>,
        out: &mut Outbox<'_>,
    ) {
        let q = self.queries.get(qid).expect("known query");
        if q.round.as_ref().is_some_and(|r| r.kind == kind) {
            return;
        }
        let target = q.querier_key;
        let mut acc = Vec::with_capacity(cts.len());
        let mut subs = Vec::with_capacity(cts.len());
        for ct in cts {
            match kind {
                RoundKind::Obfuscation => {
                    let (share, proof) = cto_share(ct, &mut self.rng);
                    acc.push(share);
                    subs.push(proof.to_bytes());
                }
                RoundKind::KeySwitch => {
                    let (share, proof) = ctks_share(&self.elgamal, ct, &target, &mut self.rng);
                    acc.push(Ciphertext {
                        c1: share.w1,
                        c2: share.w2,
                    });
                    subs.push(proof.to_bytes());
                }
            }
        }
        let ty = match kind {
            RoundKind::Obfuscation => ProofType::Obfuscation,
            RoundKind::KeySwitch => ProofType::KeySwitch,
        };
        self.bundle(qid, ty, subs, shared, out);
        let children: BTreeSet<String> = shared.tree.children(&self.id).into_iter().map(String::from).collect();
        let request = cts_payload(kind as u8, cts);
        out.send_all(qid, Round::RoundRequest, &children, &request);
        if !children.is_empty() {
            out.timer(qid, shared.config.timeouts.cn_ms, Timer::RoundWait(kind));
        }
        let q = self.queries.get_mut(qid).expect("known query");
        q.round = Some(TreeRound {
            kind,
            acc,
            waiting: children,
            done: false,
        });
        self.try_finish_round(qid, shared, out);
    }

    fn on_share(&mut self, qid: &str, msg: &Message, shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        let Ok((kind, cts)) = parse_cts::<G>(&msg.payload) else {
            return;
        };
        let q = self.queries.get_mut(qid).expect("checked");
        let Some(r) = q.round.as_mut().filter(|r| r.kind as u8 == kind && !r.done) else {
            return;
        };
        if cts.len() != r.acc.len() || !r.waiting.remove(&msg.sender) {
            return;
        }
        for (a, s) in r.acc.iter_mut().zip(cts) {
            *a += s;
        }
        self.try_finish_round(qid, shared, out);
    }

    fn try_finish_round(&mut self, qid: &str, shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        let q = self.queries.get_mut(qid).expect("known query");
        let r = q.round.as_mut().expect("round started");
        if r.done || !r.waiting.is_empty() {
            return;
        }
        r.done = true;
        let (kind, acc) = (r.kind, r.acc.clone());
        if let Some(parent) = shared.tree.parent(&self.id) {
            out.send(qid, Round::RoundShare, parent, cts_payload(kind as u8, &acc));
            return;
        }
        match kind {
            RoundKind::Obfuscation => {
                let v = q.value.as_mut().expect("aggregated");
                v.v = acc;
                self.advance_root(qid, shared, out);
            }
            RoundKind::KeySwitch => {
                q.stage = Stage::Done;
                let input = q.value.as_ref().expect("set").flat();
                let switched: Vec<Ciphertext<G>> = input
                    .iter()
                    .zip(&acc)
                    .map(|(ct, s)| ctks_combine(ct, &KeySwitchShare { w1: s.c1, w2: s.c2 }))
                    .collect();
                out.send(qid, Round::Result, &shared.config.querier.id, cts_payload(0, &switched));
            }
        }
    }

    fn shuffle_step(&mut self, qid: &str, list: Vec<Ciphertext<G>>, shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        let rounds = shared.config.shuffle_rounds;
        let (shuffled, proof) = match shuffle_and_prove(&list, &shared.collective, rounds, &mut self.rng) {
            Ok(x) => x,
            Err(e) => return self.abort(qid, &format!("shuffle: {e}"), shared, out),
        };
        self.bundle(qid, ProofType::Shuffle, vec![proof.to_bytes()], shared, out);
        let nodes = shared.tree.nodes();
        let pos = nodes.iter().position(|n| *n == self.id).expect("member");
        let root = shared.tree.root();
        match nodes.get(pos + 1) {
            Some(next) => out.send(qid, Round::CdpList, next, cts_payload(CDP_PASS, &shuffled)),
            None if self.id == root => self.noise_ready(qid, shuffled, shared, out),
            None => out.send(qid, Round::CdpList, root, cts_payload(CDP_FINAL, &shuffled)),
        }
    }

    fn on_cdp(&mut self, qid: &str, msg: &Message, shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        let Ok((tag, list)) = parse_cts::<G>(&msg.payload) else {
            return;
        };
        let nodes = shared.tree.nodes();
        let pos = nodes.iter().position(|n| *n == self.id).expect("member");
        match tag {
            CDP_PASS if pos > 0 && nodes[pos - 1] == msg.sender => self.shuffle_step(qid, list, shared, out),
            CDP_FINAL if nodes.last() == Some(&msg.sender) && shared.tree.root() == self.id => {
                self.noise_ready(qid, list, shared, out)
            }
            _ => log::warn!("{}: unexpected noise list from {}", self.id, msg.sender),
        }
    }

    fn noise_ready(&mut self, qid: &str, list: Vec<Ciphertext<G>>, shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        let q = self.queries.get_mut(qid).expect("known query");
        q.noise = Some(list);
        if q.stage == Stage::AwaitingNoise {
            self.advance_root(qid, shared, out);
        }
    }

    fn on_timer(&mut self, qid: &str, payload: &[u8], shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        let q = self.queries.get_mut(qid).expect("checked");
        match Timer::from_bytes(payload) {
            Some(Timer::DpWait) if !q.dps_closed => {
                log::info!("{}: {} DPs did not answer {qid}", self.id, q.dps_waiting.len());
                q.dps_closed = true;
                self.try_aggregate(qid, shared, out);
            }
            Some(Timer::ChildWait) if !q.aggregated && !q.children_waiting.is_empty() => {
                let missing: Vec<_> = q.children_waiting.iter().cloned().collect();
                self.abort(qid, &format!("no partial result from {}", missing.join(",")), shared, out);
            }
            Some(Timer::RoundWait(k)) => {
                if let Some(r) = q.round.as_ref().filter(|r| r.kind == k && !r.done) {
                    let missing: Vec<_> = r.waiting.iter().cloned().collect();
                    self.abort(qid, &format!("no {k:?} share from {}", missing.join(",")), shared, out);
                }
            }
            _ => {}
        }
    }
}
