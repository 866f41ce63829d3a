//! Blocks, the append-only chain file and audit.
//!
//! Chain file layout: the magic `VQCHAIN1`, then per block a `u32`-length
//! prefixed JSON body followed by a `u32` signature count and, per
//! signature, the length-prefixed VN identity and signature bytes. A text
//! index next to it (`<file>.idx`) lists `query_id height offset` per line;
//! it only speeds up lookups, audit always re-verifies the whole chain.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{LedgerError, ProofType, QueryProofsMap, Status};
use crate::query::Query;
use crate::sign::{self, SigningKey, VerifyingKey};
use crate::wire::{Reader, WireError, Writer};

pub const BLOCK_DOMAIN: &[u8] = b"veriquery/block";
const MAGIC: &[u8; 8] = b"VQCHAIN1";
const GENESIS: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockBody {
    pub height: u64,
    pub query_id: String,
    pub query: Query,
    /// One map per VN.
    pub maps: BTreeMap<String, QueryProofsMap>,
    pub prev_hash: String,
    pub leader: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub body: BlockBody,
    pub signatures: Vec<(String, Vec<u8>)>,
    raw_body: Vec<u8>,
}

impl Block {
    pub fn new(body: BlockBody) -> Self {
        let raw_body = serde_json::to_vec(&body).expect("block body serializes");
        Block {
            body,
            signatures: Vec::new(),
            raw_body,
        }
    }

    /// Hex SHA-256 of the serialized body.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(&self.raw_body))
    }

    pub fn sign(&mut self, vn: &str, key: &SigningKey) {
        let sig = sign::sign(key, BLOCK_DOMAIN, self.hash().as_bytes());
        self.signatures.retain(|(id, _)| id != vn);
        self.signatures.push((vn.to_string(), sig));
    }

    /// VNs with a valid signature, and whether any included signature is
    /// invalid or from an unknown VN.
    pub fn check_signatures(&self, vn_keys: &BTreeMap<String, VerifyingKey>) -> (Vec<String>, bool) {
        let h = self.hash();
        let mut valid = Vec::new();
        let mut bad = false;
        for (id, sig) in &self.signatures {
            match vn_keys.get(id) {
                Some(vk) if sign::verify(vk, BLOCK_DOMAIN, h.as_bytes(), sig) && !valid.contains(id) => {
                    valid.push(id.clone())
                }
                _ => bad = true,
            }
        }
        (valid, bad)
    }

    /// The serialized body followed by the signatures.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&self.raw_body).len(self.signatures.len());
        for (id, sig) in &self.signatures {
            w.str(id).bytes(sig);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LedgerError> {
        let mut r = Reader::new(bytes);
        let b = Block::read(&mut r).map_err(LedgerError::BrokenChain)?;
        r.finish().map_err(|e| LedgerError::BrokenChain(e.to_string()))?;
        Ok(b)
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, String> {
        let raw_body = r.bytes().map_err(|e| e.to_string())?.to_vec();
        let body: BlockBody = serde_json::from_slice(&raw_body).map_err(|e| e.to_string())?;
        let n = r.count(8).map_err(|e| e.to_string())?;
        let mut signatures = Vec::with_capacity(n);
        for _ in 0..n {
            let id = r.str().map_err(|e| e.to_string())?;
            signatures.push((id, r.bytes().map_err(|e| e.to_string())?.to_vec()));
        }
        Ok(Block {
            body,
            signatures,
            raw_body,
        })
    }

    /// A VN endorses the block iff the map recorded under its identity is
    /// exactly its own.
    pub fn endorsed_by(&self, vn: &str, local: &QueryProofsMap) -> bool {
        self.body.maps.get(vn) == Some(local)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Chain {
    pub blocks: Vec<Block>,
}

impl Chain {
    pub fn head_hash(&self) -> String {
        self.blocks.last().map_or_else(|| GENESIS.to_string(), Block::hash)
    }

    pub fn height(&self) -> u64 {
        self.blocks.len() as u64
    }

    /// Round-robin leader for the next block.
    pub fn leader<'a>(&self, vns: &'a [String]) -> &'a str {
        &vns[(self.height() % vns.len() as u64) as usize]
    }

    pub fn propose(&self, query: &Query, maps: BTreeMap<String, QueryProofsMap>, vns: &[String]) -> Block {
        Block::new(BlockBody {
            height: self.height(),
            query_id: query.id.clone(),
            query: query.clone(),
            maps,
            prev_hash: self.head_hash(),
            leader: self.leader(vns).to_string(),
        })
    }

    /// Appends a signed block if it extends the head and carries at least
    /// `f_h` valid signatures.
    pub fn append(
        &mut self,
        block: Block,
        vn_keys: &BTreeMap<String, VerifyingKey>,
        f_h: usize,
    ) -> Result<(), LedgerError> {
        if block.body.prev_hash != self.head_hash() || block.body.height != self.height() {
            return Err(LedgerError::BrokenChain("block does not extend the head".into()));
        }
        let (valid, _) = block.check_signatures(vn_keys);
        if valid.len() < f_h {
            return Err(LedgerError::InsufficientSignatures {
                got: valid.len(),
                need: f_h,
            });
        }
        self.blocks.push(block);
        Ok(())
    }

    pub fn find(&self, query_id: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.body.query_id == query_id)
    }

    /// Checks heights, hash links and that every block carries only valid
    /// signatures, at least `f_h` of them.
    pub fn verify(&self, vn_keys: &BTreeMap<String, VerifyingKey>, f_h: usize) -> Result<(), LedgerError> {
        let mut prev = GENESIS.to_string();
        for (i, b) in self.blocks.iter().enumerate() {
            if b.body.height != i as u64 || b.body.prev_hash != prev {
                return Err(LedgerError::BrokenChain(format!("block {i} is not linked to its predecessor")));
            }
            let (valid, bad) = b.check_signatures(vn_keys);
            if bad {
                return Err(LedgerError::BrokenChain(format!("block {i} carries an invalid signature")));
            }
            if valid.len() < f_h {
                return Err(LedgerError::BrokenChain(format!(
                    "block {i} has {} signatures, need {f_h}",
                    valid.len()
                )));
            }
            prev = b.hash();
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.encode_with_offsets().0
    }

    fn encode_with_offsets(&self) -> (Vec<u8>, Vec<usize>) {
        let mut w = Writer::new();
        w.raw(MAGIC);
        let mut offsets = Vec::new();
        let mut pos = MAGIC.len();
        for b in &self.blocks {
            offsets.push(pos);
            let bytes = b.to_bytes();
            pos += bytes.len();
            w.raw(&bytes);
        }
        (w.into_bytes(), offsets)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LedgerError> {
        let broken = |e: WireError| LedgerError::BrokenChain(e.to_string());
        let mut r = Reader::new(bytes);
        if r.take(MAGIC.len()).map_err(broken)? != MAGIC {
            return Err(LedgerError::BrokenChain("bad magic".into()));
        }
        let mut blocks = Vec::new();
        while r.remaining() > 0 {
            let b = Block::read(&mut r)
                .map_err(|e| LedgerError::BrokenChain(format!("block {}: {e}", blocks.len())))?;
            blocks.push(b);
        }
        Ok(Chain { blocks })
    }

    /// Writes the chain file and its index.
    pub fn save(&self, path: &Path) -> Result<(), LedgerError> {
        let io = |e: std::io::Error| LedgerError::Io(e.to_string());
        let (bytes, offsets) = self.encode_with_offsets();
        std::fs::write(path, bytes).map_err(io)?;
        let index: String = self
            .blocks
            .iter()
            .zip(offsets)
            .map(|(b, off)| format!("{} {} {}\n", b.body.query_id, b.body.height, off))
            .collect();
        std::fs::write(index_path(path), index).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, LedgerError> {
        let bytes = std::fs::read(path).map_err(|e| LedgerError::Io(e.to_string()))?;
        Chain::from_bytes(&bytes)
    }
}

pub fn index_path(path: &Path) -> std::path::PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".idx");
    p.into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub key: String,
    pub prover: String,
    pub proof_type: ProofType,
    pub seq: u32,
    pub verdict: Status,
    pub statuses: BTreeMap<String, Status>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub query_id: String,
    pub height: u64,
    pub block_hash: String,
    pub leader: String,
    pub valid_signatures: usize,
    pub f_h: usize,
    pub entries: Vec<AuditEntry>,
    pub false_entries: Vec<AuditEntry>,
}

fn verdict(statuses: &BTreeMap<String, Status>) -> Status {
    let has = |s| statuses.values().any(|x| *x == s);
    if has(Status::False) {
        Status::False
    } else if has(Status::True) {
        Status::True
    } else if has(Status::Unverified) {
        Status::Unverified
    } else {
        Status::NotReceived
    }
}

/// Parses and verifies the whole chain, then reports the proof statuses of
/// the block for `query_id`. Any proof some VN found false is listed in
/// `false_entries` with its prover.
pub fn audit(
    chain_bytes: &[u8],
    query_id: &str,
    vn_keys: &BTreeMap<String, VerifyingKey>,
    f_h: usize,
) -> Result<AuditReport, LedgerError> {
    let chain = Chain::from_bytes(chain_bytes)?;
    chain.verify(vn_keys, f_h)?;
    let block = chain
        .find(query_id)
        .ok_or_else(|| LedgerError::BlockNotFound(query_id.to_string()))?;
    let mut merged: BTreeMap<&String, AuditEntry> = BTreeMap::new();
    for (vn, map) in &block.body.maps {
        for (key, e) in &map.entries {
            merged
                .entry(key)
                .or_insert_with(|| AuditEntry {
                    key: key.clone(),
                    prover: e.prover.clone(),
                    proof_type: e.proof_type,
                    seq: e.seq,
                    verdict: Status::NotReceived,
                    statuses: BTreeMap::new(),
                })
                .statuses
                .insert(vn.clone(), e.status);
        }
    }
    let entries: Vec<AuditEntry> = merged
        .into_values()
        .map(|mut e| {
            e.verdict = verdict(&e.statuses);
            e
        })
        .collect();
    let false_entries = entries.iter().filter(|e| e.verdict == Status::False).cloned().collect();
    Ok(AuditReport {
        query_id: query_id.to_string(),
        height: block.body.height,
        block_hash: block.hash(),
        leader: block.body.leader.clone(),
        valid_signatures: block.check_signatures(vn_keys).0.len(),
        f_h,
        entries,
        false_entries,
    })
}
