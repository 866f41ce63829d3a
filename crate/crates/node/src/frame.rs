//! Messages and their wire frames. The same frame format is used by the
//! in-process bus and the socket transport:
//!
//! ```text
//! u32 length ‖ "VQ" ‖ version ‖ round ‖ query id ‖ sender ‖ recipient ‖ payload ‖ signature
//! ```
//!
//! Strings and byte fields are length-prefixed. The signature covers
//! everything between the length and the signature itself.

use thiserror::Error;
use veriquery::sign::{self, SigningKey, VerifyingKey};
use veriquery::wire::{Reader, WireError, Writer};

pub const FRAME_DOMAIN: &[u8] = b"veriquery/frame";
const MAGIC: &[u8; 2] = b"VQ";
const VERSION: u8 = 1;
/// Largest frame accepted from a socket.
pub const MAX_FRAME: usize = 64 << 20;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("bad signature from {0}")]
    BadSignature(String),
    #[error("unknown sender {0}")]
    UnknownSender(String),
}

impl From<WireError> for FrameError {
    fn from(e: WireError) -> Self {
        FrameError::Malformed(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Round {
    /// Q → CN/VN, CN → DP: the query and the querier's key.
    QueryRequest,
    /// DP → CN: an encoded response.
    DpResponse,
    /// CN → parent CN: aggregated partial result.
    Partial,
    /// CN → next CN: the noise list after one shuffle.
    CdpList,
    /// Parent → child CN: start a tree round (obfuscation or key switch).
    RoundRequest,
    /// Child → parent CN: summed shares of a tree round.
    RoundShare,
    /// Root CN → Q: the result under Q's key.
    Result,
    /// Any prover → VN: a signed proof bundle.
    Proof,
    /// Q → VN: the result arrived; close the verification window.
    QueryDone,
    /// VN → leader: the VN's query-proofs map.
    Map,
    /// Leader → VN: a block to endorse.
    BlockProposal,
    /// VN → leader: a block signature, empty when the VN refuses.
    BlockSig,
    /// Leader → VN: the committed block.
    BlockCommit,
    /// Leader → Q: the block outcome.
    BlockDone,
    /// CN → Q: the query cannot complete.
    Abort,
    /// Local timer; never sent over the network.
    Timer,
}

impl Round {
    const ALL: [Round; 16] = [
        Round::QueryRequest,
        Round::DpResponse,
        Round::Partial,
        Round::CdpList,
        Round::RoundRequest,
        Round::RoundShare,
        Round::Result,
        Round::Proof,
        Round::QueryDone,
        Round::Map,
        Round::BlockProposal,
        Round::BlockSig,
        Round::BlockCommit,
        Round::BlockDone,
        Round::Abort,
        Round::Timer,
    ];

    pub fn tag(self) -> u8 {
        Round::ALL.iter().position(|r| *r == self).expect("listed") as u8
    }

    pub fn from_tag(t: u8) -> Option<Round> {
        Round::ALL.get(t as usize).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub query_id: String,
    pub round: Round,
    pub sender: String,
    pub recipient: String,
    pub payload: Vec<u8>,
    pub signature: Vec<u8>,
}

impl Message {
    pub fn new(query_id: &str, round: Round, sender: &str, recipient: &str, payload: Vec<u8>) -> Self {
        Message {
            query_id: query_id.to_string(),
            round,
            sender: sender.to_string(),
            recipient: recipient.to_string(),
            payload,
            signature: Vec::new(),
        }
    }

    fn body(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(MAGIC)
            .u8(VERSION)
            .u8(self.round.tag())
            .str(&self.query_id)
            .str(&self.sender)
            .str(&self.recipient)
            .bytes(&self.payload);
        w.into_bytes()
    }

    pub fn sign(&mut self, key: &SigningKey) {
        self.signature = sign::sign(key, FRAME_DOMAIN, &self.body());
    }

    pub fn verify(&self, key: &VerifyingKey) -> bool {
        sign::verify(key, FRAME_DOMAIN, &self.body(), &self.signature)
    }

    /// The length-prefixed frame.
    pub fn to_frame(&self) -> Vec<u8> {
        let mut body = self.body();
        let mut w = Writer::new();
        w.bytes(&self.signature);
        body.extend(w.into_bytes());
        let mut out = (body.len() as u32).to_le_bytes().to_vec();
        out.extend(body);
        out
    }

    pub fn from_frame(frame: &[u8]) -> Result<Self, FrameError> {
        let mut r = Reader::new(frame);
        let len = r.u32()? as usize;
        if len != r.remaining() {
            return Err(FrameError::Malformed(format!("length {len}, have {}", r.remaining())));
        }
        if r.take(2)? != MAGIC || r.u8()? != VERSION {
            return Err(FrameError::Malformed("bad magic or version".into()));
        }
        let round = Round::from_tag(r.u8()?).ok_or_else(|| FrameError::Malformed("unknown round".into()))?;
        let m = Message {
            round,
            query_id: r.str()?,
            sender: r.str()?,
            recipient: r.str()?,
            payload: r.bytes()?.to_vec(),
            signature: r.bytes()?.to_vec(),
        };
        r.finish()?;
        Ok(m)
    }

    pub fn frame_len(&self) -> usize {
        // length, magic, version, round, four length prefixes per field
        4 + 2 + 1 + 1 + 5 * 4
            + self.query_id.len()
            + self.sender.len()
            + self.recipient.len()
            + self.payload.len()
            + self.signature.len()
    }
}
