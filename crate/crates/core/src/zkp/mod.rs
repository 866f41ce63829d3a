//! Non-interactive zero-knowledge proofs: linear discrete-log relations,
//! pairing-based range proofs and a verifiable shuffle.
//!
//! Every serialized proof starts with a one-byte type tag followed by the
//! fixed-length canonical encodings of its elements. Challenges are derived
//! with a domain-separated [`Transcript`] over the statement and all
//! commitments.

use thiserror::Error;

use crate::group::GroupError;
use crate::wire::WireError;

pub mod linear;
pub mod range;
pub mod shuffle;
mod transcript;

pub use self::linear::{
    key_switch_statement, obfuscation_statement, prove_linear, prove_linear_with_nonces,
    verify_linear, Equation, LinearRelationProof, LinearStatement,
};
pub use self::range::{
    prove_bounded, prove_range, range_params, range_setup, shift_range, verify_bounded,
    verify_range, BoundedRangeProof, RangeParams, RangeProof, RangeSignatures,
};
pub use self::shuffle::{shuffle_and_prove, verify_shuffle, ShuffleProof};
pub use self::transcript::Transcript;

/// Leading type byte of serialized proofs.
pub mod tag {
    pub const LINEAR: u8 = 0x01;
    pub const RANGE: u8 = 0x02;
    pub const BOUNDED_RANGE: u8 = 0x03;
    pub const SHUFFLE: u8 = 0x04;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ZkpError {
    #[error("malformed proof: {0}")]
    MalformedProof(#[from] WireError),
    #[error("value {m} outside [{lo}, {hi})")]
    OutOfRange { m: i128, lo: i128, hi: i128 },
    #[error("invalid range parameters: {0}")]
    InvalidRangeParams(&'static str),
    #[error("cannot shuffle an empty list")]
    EmptyList,
    #[error(transparent)]
    Group(#[from] GroupError),
}
