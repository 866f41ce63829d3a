//! Prime-order group abstraction used by every other module.
//!
//! Two backends are provided:
//!
//! - [`Ristretto`]: the Ristretto255 group over Curve25519. Fast, no pairing.
//! - [`Bn254`]: the G1 group of the BN254 pairing-friendly curve. Slower, but
//!   exposes a bilinear map into a target group, which the range proofs need.
//!
//! All higher layers only speak to the [`Group`] trait and to the canonical
//! byte encodings it defines (see [`Group::encode_point`] and friends).

mod bn254;
mod dlog;
mod ristretto;

use std::fmt::Debug;
use std::hash::Hash;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha512};
use thiserror::Error;

pub use self::bn254::Bn254;
pub use self::dlog::{DlogTable, DEFAULT_MAX_MESSAGE};
pub use self::ristretto::Ristretto;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("the {0} profile has no bilinear pairing")]
    PairingUnavailable(&'static str),
    #[error("point is not in the discrete-log table range (|m| > {max})")]
    OutOfTableRange { max: u64 },
    #[error("malformed {what} encoding")]
    Malformed { what: &'static str },
}

/// Curve profile selected in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Ristretto255; range proofs unavailable.
    Ristretto,
    /// BN254; range proofs available.
    Bn254,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Ristretto => Ristretto::NAME,
            Profile::Bn254 => Bn254::NAME,
        }
    }

    pub fn supports_pairing(self) -> bool {
        matches!(self, Profile::Bn254)
    }
}

/// A prime-order group with scalar field arithmetic, canonical encodings,
/// hashing into the scalar field and an optional pairing.
///
/// Points are written additively. The target group of the pairing is also
/// written additively, so `s * e(P, Q)` means exponentiation.
pub trait Group: 'static + Copy + Clone + Debug + Default + PartialEq + Eq + Hash + Send + Sync {
    type Scalar: Copy
        + Clone
        + Debug
        + PartialEq
        + Eq
        + Send
        + Sync
        + Add<Output = Self::Scalar>
        + Sub<Output = Self::Scalar>
        + Mul<Output = Self::Scalar>
        + Neg<Output = Self::Scalar>;

    type Point: Copy
        + Clone
        + Debug
        + PartialEq
        + Eq
        + Send
        + Sync
        + Add<Output = Self::Point>
        + AddAssign
        + Sub<Output = Self::Point>
        + Neg<Output = Self::Point>
        + Mul<Self::Scalar, Output = Self::Point>;

    /// Second source group of the pairing.
    type G2: Copy + Clone + Debug + PartialEq + Eq + Send + Sync;

    /// Target group of the pairing, written additively.
    type Target: Copy
        + Clone
        + Debug
        + PartialEq
        + Eq
        + Send
        + Sync
        + Add<Output = Self::Target>
        + Sub<Output = Self::Target>
        + Neg<Output = Self::Target>
        + Mul<Self::Scalar, Output = Self::Target>;

    const NAME: &'static str;
    const PROFILE: Profile;
    const SCALAR_LEN: usize;
    const POINT_LEN: usize;
    const G2_LEN: usize;
    const TARGET_LEN: usize;

    fn generator() -> Self::Point;
    fn identity() -> Self::Point;
    /// `s * B`, possibly using precomputed tables.
    fn mul_base(s: &Self::Scalar) -> Self::Point {
        Self::generator() * *s
    }

    fn scalar_zero() -> Self::Scalar;
    fn scalar_one() -> Self::Scalar;
    fn scalar_from_u64(v: u64) -> Self::Scalar;
    fn scalar_invert(s: &Self::Scalar) -> Option<Self::Scalar>;
    fn scalar_random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self::Scalar;
    /// Reduces 64 uniformly distributed bytes modulo the group order.
    fn scalar_from_wide(bytes: &[u8; 64]) -> Self::Scalar;

    fn encode_scalar(s: &Self::Scalar) -> Vec<u8>;
    fn decode_scalar(bytes: &[u8]) -> Result<Self::Scalar, GroupError>;
    fn encode_point(p: &Self::Point) -> Vec<u8>;
    fn decode_point(bytes: &[u8]) -> Result<Self::Point, GroupError>;

    fn g2_generator() -> Result<Self::G2, GroupError>;
    fn g2_mul(p: &Self::G2, s: &Self::Scalar) -> Self::G2;
    fn g2_add(a: &Self::G2, b: &Self::G2) -> Self::G2;
    fn encode_g2(p: &Self::G2) -> Vec<u8>;
    fn decode_g2(bytes: &[u8]) -> Result<Self::G2, GroupError>;

    fn pairing(p: &Self::Point, q: &Self::G2) -> Result<Self::Target, GroupError>;
    /// `sum_i e(p_i, q_i)`, sharing the final exponentiation.
    fn multi_pairing(pairs: &[(Self::Point, Self::G2)]) -> Result<Self::Target, GroupError>;
    fn target_identity() -> Self::Target;
    fn encode_target(t: &Self::Target) -> Vec<u8>;
    fn decode_target(bytes: &[u8]) -> Result<Self::Target, GroupError>;

    fn supports_pairing() -> bool {
        Self::PROFILE.supports_pairing()
    }

    /// Signed integer embedded into the scalar field.
    fn scalar_from_i64(v: i64) -> Self::Scalar {
        let s = Self::scalar_from_u64(v.unsigned_abs());
        if v < 0 {
            -s
        } else {
            s
        }
    }

    /// Hashes arbitrary bytes into the scalar field (SHA-512, wide reduction).
    fn hash_to_scalar(data: &[u8]) -> Self::Scalar {
        let digest: [u8; 64] = Sha512::digest(data).into();
        Self::scalar_from_wide(&digest)
    }
}

/// Draws a uniformly random scalar.
pub fn scalar_random<G: Group, R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> G::Scalar {
    G::scalar_random(rng)
}

/// `s * P`.
pub fn point_mul<G: Group>(s: &G::Scalar, p: &G::Point) -> G::Point {
    *p * *s
}

/// Bilinear map into the target group.
pub fn pairing<G: Group>(p: &G::Point, q: &G::G2) -> Result<G::Target, GroupError> {
    G::pairing(p, q)
}

/// Maps `m * B` back to `m`.
pub fn dlog_decode<G: Group>(p: &G::Point, table: &DlogTable<G>) -> Result<i64, GroupError> {
    table.lookup(p)
}
