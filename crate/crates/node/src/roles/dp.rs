use std::sync::Arc;

use rand_chacha::ChaCha20Rng;
use veriquery::encodings::{check_entry_bounds, encode_plain, encrypt_plain, neutral_plain, PlainResponse};
use veriquery::group::Group;
use veriquery::ledger::{range_sub_proof, ProofBundle, ProofType};
use veriquery::query::Query;
use veriquery::sign::SigningKey;
use veriquery::wire::Encode;
use veriquery::zkp::range::{prove_bounded, prove_bounded_unchecked, range_params};

use super::{send_bundle, Outbox, QueryRequest, RoleStats, Shared};
use crate::config::Fault;
use crate::data::Table;
use crate::frame::{Message, Round};

pub struct Dp<G: Group> {
    pub(crate) id: String,
    pub(crate) key: SigningKey,
    pub(crate) stats: RoleStats,
    table: Table,
    pub(crate) fault: Option<Fault>,
    rng: ChaCha20Rng,
    _group: std::marker::PhantomData<G>,
}

impl<G: Group> Dp<G> {
    pub fn new(id: String, key: SigningKey, table: Table, fault: Option<Fault>, rng: ChaCha20Rng) -> Self {
        Dp {
            id,
            key,
            stats: RoleStats::default(),
            table,
            fault,
            rng,
            _group: std::marker::PhantomData,
        }
    }

    pub(crate) fn handle(&mut self, msg: Message, shared: &Arc<Shared<G>>, out: &mut Outbox<'_>) {
        if self.fault == Some(Fault::Offline) || msg.round != Round::QueryRequest {
            return;
        }
        if shared.dp_cn.get(&self.id) != Some(&msg.sender) {
            return;
        }
        let Some((query, _)) = QueryRequest::parse::<G>(&msg.payload) else {
            return;
        };
        if query.id != msg.query_id || !query.dps.contains(&self.id) {
            return;
        }
        let plain = self.local_response(&query);
        let (resp, nonces) = encrypt_plain::<G, _>(&plain, &shared.collective, &mut self.rng);
        if shared.range_active(&query) {
            self.prove_ranges(&query, &plain, &resp.v, &nonces, shared, out);
        }
        out.send(&query.id, Round::DpResponse, &msg.sender, resp.to_bytes());
    }

    /// Retrieves and encodes the local records; anything that cannot be
    /// encoded becomes a neutral response.
    fn local_response(&mut self, query: &Query) -> PlainResponse {
        let op = &query.operation;
        let encoded = self
            .table
            .select(&query.attributes, query.filter.as_ref())
            .map_err(|e| e.to_string())
            .and_then(|recs| encode_plain(op, &recs, &mut self.rng).map_err(|e| e.to_string()));
        let mut plain = match encoded {
            Ok(p) => p,
            Err(e) => {
                log::warn!("{}: sending a neutral response: {e}", self.id);
                neutral_plain(op)
            }
        };
        match (self.fault, op.entry_bounds()) {
            (Some(Fault::OutOfRange), Some((_, hi))) if !plain.v.is_empty() => plain.v[0] = hi + 7,
            _ => {
                if let Err(e) = check_entry_bounds(op, &plain) {
                    log::warn!("{}: sending a neutral response: {e}", self.id);
                    plain = neutral_plain(op);
                }
            }
        }
        plain
    }

    fn prove_ranges(
        &mut self,
        query: &Query,
        plain: &PlainResponse,
        v: &[veriquery::elgamal::Ciphertext<G>],
        nonces: &[G::Scalar],
        shared: &Shared<G>,
        out: &mut Outbox<'_>,
    ) {
        let (Some(sigs), Some((lo, hi))) = (&shared.range, query.operation.entry_bounds()) else {
            return;
        };
        let params = match range_params(lo, hi, sigs.u) {
            Ok(p) => p,
            Err(e) => {
                log::warn!("{}: no range proofs: {e}", self.id);
                return;
            }
        };
        for (j, ((&m, ct), r)) in plain.v.iter().zip(v).zip(nonces).enumerate() {
            let k = &shared.collective;
            let proof = if (lo..hi).contains(&m) {
                prove_bounded(m, r, k, sigs, &params, &mut self.rng)
            } else {
                prove_bounded_unchecked(m, r, k, sigs, &params, &mut self.rng)
            };
            let sub = match proof {
                Ok(p) => vec![range_sub_proof(&ct.c2, &p)],
                Err(e) => {
                    log::warn!("{}: range proof for entry {j} failed: {e}", self.id);
                    continue;
                }
            };
            let b = ProofBundle::new_signed(&query.id, &self.id, ProofType::Range, j as u32, sub, &self.key);
            self.stats.bundles_sent += 1;
            self.stats.sub_proofs_sent += 1;
            send_bundle(out, &shared.vns, &b);
        }
    }
}
