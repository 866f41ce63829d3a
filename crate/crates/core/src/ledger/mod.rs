//! Verifying-node side: expected-proof derivation, probabilistic
//! verification of proof bundles, query-proofs maps, blocks and audit.
//!
//! Sub-proof payloads per proof type:
//!
//! | type        | one sub-proof                                   |
//! |-------------|-------------------------------------------------|
//! | range       | `C2` point, then a bounded range proof          |
//! | aggregation | one vector component: inputs, then the output   |
//! | obfuscation | linear-relation proof for one ciphertext        |
//! | shuffle     | the whole shuffle proof                         |
//! | key switch  | linear-relation proof for one ciphertext        |

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::elgamal::{decode_ciphertexts, encode_ciphertexts, Ciphertext};
use crate::group::Group;
use crate::protocols::{verify_key_switch, AggregationProof};
use crate::query::Query;
use crate::sign::{self, SigningKey, VerifyingKey};
use crate::wire::{Decode, Encode, Reader, WireError, Writer};
use crate::zkp::linear::LABEL_OBFUSCATION;
use crate::zkp::{
    verify_bounded, verify_linear, verify_shuffle, BoundedRangeProof, LinearRelationProof, RangeParams,
    RangeSignatures, ShuffleProof,
};

mod chain;
mod policy;

pub use self::chain::{audit, AuditEntry, AuditReport, Block, Chain, BLOCK_DOMAIN};
pub use self::policy::{coverage_probability, default_f_h, simulate_coverage, Coverage, VerificationPolicy};

pub const PROOF_DOMAIN: &[u8] = b"veriquery/proof";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("malformed query: {0}")]
    MalformedQuery(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("{got} valid signatures, need {need}")]
    InsufficientSignatures { got: usize, need: usize },
    #[error("no block for query {0}")]
    BlockNotFound(String),
    #[error("broken chain: {0}")]
    BrokenChain(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProofType {
    Range,
    Aggregation,
    Obfuscation,
    Shuffle,
    KeySwitch,
}

impl ProofType {
    fn tag(self) -> u8 {
        match self {
            ProofType::Range => 1,
            ProofType::Aggregation => 2,
            ProofType::Obfuscation => 3,
            ProofType::Shuffle => 4,
            ProofType::KeySwitch => 5,
        }
    }

    fn from_tag(t: u8) -> Result<Self, WireError> {
        Ok(match t {
            1 => ProofType::Range,
            2 => ProofType::Aggregation,
            3 => ProofType::Obfuscation,
            4 => ProofType::Shuffle,
            5 => ProofType::KeySwitch,
            tag => return Err(WireError::UnknownTag { what: "proof type", tag }),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ProofType::Range => "range",
            ProofType::Aggregation => "aggregation",
            ProofType::Obfuscation => "obfuscation",
            ProofType::Shuffle => "shuffle",
            ProofType::KeySwitch => "key_switch",
        }
    }
}

/// Hex SHA-256 of `query_id ‖ prover ‖ type ‖ seq`, each length-framed.
pub fn proof_key(query_id: &str, prover: &str, ty: ProofType, seq: u32) -> String {
    let mut w = Writer::new();
    w.str(query_id).str(prover).u8(ty.tag()).u32(seq);
    hex::encode(Sha256::digest(w.into_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofBundle {
    pub query_id: String,
    pub prover: String,
    pub proof_type: ProofType,
    pub seq: u32,
    pub sub_proofs: Vec<Vec<u8>>,
    pub signature: Vec<u8>,
}

impl ProofBundle {
    pub fn new_signed(
        query_id: &str,
        prover: &str,
        proof_type: ProofType,
        seq: u32,
        sub_proofs: Vec<Vec<u8>>,
        key: &SigningKey,
    ) -> Self {
        let mut b = ProofBundle {
            query_id: query_id.to_string(),
            prover: prover.to_string(),
            proof_type,
            seq,
            sub_proofs,
            signature: Vec::new(),
        };
        b.signature = sign::sign(key, PROOF_DOMAIN, &b.signed_bytes());
        b
    }

    fn signed_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.encode_body(&mut w);
        w.into_bytes()
    }

    fn encode_body(&self, w: &mut Writer) {
        w.str(&self.query_id)
            .str(&self.prover)
            .u8(self.proof_type.tag())
            .u32(self.seq)
            .len(self.sub_proofs.len());
        for s in &self.sub_proofs {
            w.bytes(s);
        }
    }

    pub fn key(&self) -> String {
        proof_key(&self.query_id, &self.prover, self.proof_type, self.seq)
    }

    pub fn verify_signature(&self, vk: &VerifyingKey) -> bool {
        sign::verify(vk, PROOF_DOMAIN, &self.signed_bytes(), &self.signature)
    }
}

impl Encode for ProofBundle {
    fn encode(&self, w: &mut Writer) {
        self.encode_body(w);
        w.bytes(&self.signature);
    }
}

impl Decode for ProofBundle {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let query_id = r.str()?;
        let prover = r.str()?;
        let proof_type = ProofType::from_tag(r.u8()?)?;
        let seq = r.u32()?;
        let n = r.count(4)?;
        let sub_proofs = (0..n).map(|_| r.bytes().map(<[u8]>::to_vec)).collect::<Result<_, _>>()?;
        Ok(ProofBundle {
            query_id,
            prover,
            proof_type,
            seq,
            sub_proofs,
            signature: r.bytes()?.to_vec(),
        })
    }
}

pub fn range_sub_proof<G: Group>(c2: &G::Point, proof: &BoundedRangeProof<G>) -> Vec<u8> {
    let mut w = Writer::new();
    w.point::<G>(c2);
    proof.encode(&mut w);
    w.into_bytes()
}

/// Splits an aggregation proof into one sub-proof per vector component
/// (the count last).
pub fn aggregation_sub_proofs<G: Group>(p: &AggregationProof<G>) -> Vec<Vec<u8>> {
    let outputs = p.output.flat();
    let inputs: Vec<Vec<Ciphertext<G>>> = p.inputs.iter().map(|i| i.flat()).collect();
    outputs
        .iter()
        .enumerate()
        .map(|(j, out)| {
            let column: Vec<Ciphertext<G>> = inputs.iter().filter_map(|i| i.get(j).copied()).collect();
            let mut w = Writer::new();
            encode_ciphertexts(&mut w, &column);
            out.encode(&mut w);
            w.into_bytes()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExpectedProof {
    pub key: String,
    pub prover: String,
    pub proof_type: ProofType,
    pub seq: u32,
}

/// Every proof a VN should receive for `query` with the given CNs:
/// one range proof per DP and bounded entry, then one proof per CN and
/// protocol round (aggregation, obfuscation in bit mode, shuffle when
/// differential privacy is on, key switch).
pub fn expected_proofs(query: &Query, cns: &[String], with_range: bool) -> Result<Vec<ExpectedProof>, LedgerError> {
    query
        .validate()
        .map_err(|e| LedgerError::MalformedQuery(e.to_string()))?;
    let mut out = Vec::new();
    let mut push = |prover: &str, ty: ProofType, seq: u32| {
        out.push(ExpectedProof {
            key: proof_key(&query.id, prover, ty, seq),
            prover: prover.to_string(),
            proof_type: ty,
            seq,
        })
    };
    if with_range && query.operation.entry_bounds().is_some() {
        let d = query.operation.dimension() as u32;
        for dp in &query.dps {
            for j in 0..d {
                push(dp, ProofType::Range, j);
            }
        }
    }
    let mut rounds = vec![ProofType::Aggregation];
    if query.operation.needs_obfuscation() {
        rounds.push(ProofType::Obfuscation);
    }
    if query.privacy.is_some() {
        rounds.push(ProofType::Shuffle);
    }
    rounds.push(ProofType::KeySwitch);
    for ty in rounds {
        for cn in cns {
            push(cn, ty, 0);
        }
    }
    Ok(out)
}

/// Public material a VN needs to check sub-proofs.
#[derive(Debug, Clone)]
pub struct VerifyContext<G: Group> {
    pub collective_key: G::Point,
    pub querier_key: G::Point,
    pub cn_keys: BTreeMap<String, G::Point>,
    pub range: Option<(RangeSignatures<G>, RangeParams)>,
    /// Signature keys of all provers.
    pub signers: BTreeMap<String, VerifyingKey>,
}

fn decode_all<T>(bytes: &[u8], f: impl FnOnce(&mut Reader<'_>) -> Result<T, WireError>) -> Option<T> {
    let mut r = Reader::new(bytes);
    let v = f(&mut r).ok()?;
    r.finish().ok()?;
    Some(v)
}

/// Checks one sub-proof of `bundle` against the context.
pub fn verify_sub_proof<G: Group>(ctx: &VerifyContext<G>, bundle: &ProofBundle, idx: usize) -> bool {
    let Some(bytes) = bundle.sub_proofs.get(idx) else {
        return false;
    };
    match bundle.proof_type {
        ProofType::Range => {
            let Some((sigs, params)) = &ctx.range else {
                return false;
            };
            decode_all(bytes, |r| Ok((r.point::<G>()?, BoundedRangeProof::<G>::decode(r)?)))
                .is_some_and(|(c2, p)| verify_bounded(&p, &c2, &ctx.collective_key, sigs, params))
        }
        ProofType::Aggregation => decode_all(bytes, |r| {
            let inputs = decode_ciphertexts::<G>(r)?;
            Ok((inputs, Ciphertext::<G>::decode(r)?))
        })
        .is_some_and(|(inputs, out)| inputs.into_iter().fold(Ciphertext::zero(), |a, b| a + b) == out),
        ProofType::Obfuscation => decode_all(bytes, LinearRelationProof::<G>::decode).is_some_and(|p| {
            p.statement.equations.len() == 2
                && p.statement.equations.iter().all(|e| e.coeffs.len() == 1)
                && verify_linear(&p, LABEL_OBFUSCATION)
        }),
        ProofType::Shuffle => decode_all(bytes, ShuffleProof::<G>::decode)
            .is_some_and(|p| p.pk == ctx.collective_key && verify_shuffle(&p)),
        ProofType::KeySwitch => {
            let Some(cn_pk) = ctx.cn_keys.get(&bundle.prover) else {
                return false;
            };
            decode_all(bytes, LinearRelationProof::<G>::decode).is_some_and(|p| {
                let eq = &p.statement.equations;
                eq.len() == 3
                    && eq[2].coeffs.len() == 2
                    && verify_key_switch(&p, cn_pk, &-eq[2].coeffs[0], &ctx.querier_key).is_some()
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    True,
    False,
    NotReceived,
    /// Received and stored, but no sub-proof was sampled.
    Unverified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOutcome {
    pub status: Status,
    pub checked: usize,
}

/// Opens the bundle with probability `T`, then checks each sub-proof with
/// probability `T_sub`. A bad signature or any failing sub-proof is false.
pub fn probabilistic_verify<G: Group, R: Rng + ?Sized>(
    ctx: &VerifyContext<G>,
    bundle: &ProofBundle,
    policy: &VerificationPolicy,
    rng: &mut R,
) -> VerifyOutcome {
    let signed = ctx
        .signers
        .get(&bundle.prover)
        .is_some_and(|vk| bundle.verify_signature(vk));
    if !signed {
        return VerifyOutcome {
            status: Status::False,
            checked: 0,
        };
    }
    let mut checked = 0;
    if rng.gen::<f64>() < policy.t {
        for i in 0..bundle.sub_proofs.len() {
            if rng.gen::<f64>() < policy.t_sub {
                checked += 1;
                if !verify_sub_proof(ctx, bundle, i) {
                    return VerifyOutcome {
                        status: Status::False,
                        checked,
                    };
                }
            }
        }
    }
    let status = if checked > 0 { Status::True } else { Status::Unverified };
    VerifyOutcome { status, checked }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofEntry {
    pub prover: String,
    pub proof_type: ProofType,
    pub seq: u32,
    pub status: Status,
}

/// One VN's verification results for one query, keyed by proof key.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueryProofsMap {
    pub entries: BTreeMap<String, ProofEntry>,
}

impl QueryProofsMap {
    pub fn new(expected: &[ExpectedProof]) -> Self {
        QueryProofsMap {
            entries: expected
                .iter()
                .map(|e| {
                    (
                        e.key.clone(),
                        ProofEntry {
                            prover: e.prover.clone(),
                            proof_type: e.proof_type,
                            seq: e.seq,
                            status: Status::NotReceived,
                        },
                    )
                })
                .collect(),
        }
    }

    /// Records a status for an expected key; unexpected keys are ignored.
    pub fn record(&mut self, key: &str, status: Status) -> bool {
        match self.entries.get_mut(key) {
            Some(e) => {
                e.status = status;
                true
            }
            None => false,
        }
    }

    pub fn status(&self, key: &str) -> Option<Status> {
        self.entries.get(key).map(|e| e.status)
    }

    pub fn count(&self, s: Status) -> usize {
        self.entries.values().filter(|e| e.status == s).count()
    }
}
