//! Additively homomorphic ElGamal on a [`Group`], collective keys and
//! fixed-point encoding of real values.
//!
//! `E_K(m) = (rB, mB + rK)`. Adding ciphertexts adds plaintexts; multiplying
//! both components by a scalar multiplies the plaintext.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use rand::{CryptoRng, RngCore};
use thiserror::Error;

use crate::group::{DlogTable, Group, GroupError};
use crate::wire::{Decode, Encode, Reader, WireError, Writer};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ElGamalError {
    #[error("message {m} exceeds the decodable bound {max}")]
    MessageTooLarge { m: i128, max: u64 },
    #[error("collective key needs at least one member")]
    EmptyMemberList,
    #[error("fixed-point input is not finite")]
    NotFinite,
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyPair<G: Group> {
    secret: G::Scalar,
    public: G::Point,
}

impl<G: Group> KeyPair<G> {
    pub fn generate<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        Self::from_secret(G::scalar_random(rng))
    }

    pub fn from_secret(secret: G::Scalar) -> Self {
        KeyPair {
            secret,
            public: G::mul_base(&secret),
        }
    }

    pub fn secret(&self) -> &G::Scalar {
        &self.secret
    }

    pub fn public(&self) -> &G::Point {
        &self.public
    }
}

/// `K = sum K_i` over the computing nodes. Decryption needs every member's
/// secret; no member ever learns `sum k_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectiveKey<G: Group> {
    pub public: G::Point,
    pub members: Vec<String>,
}

pub fn collective_key<G: Group>(
    members: &[(String, G::Point)],
) -> Result<CollectiveKey<G>, ElGamalError> {
    if members.is_empty() {
        return Err(ElGamalError::EmptyMemberList);
    }
    let mut public = G::identity();
    for (_, k) in members {
        public += *k;
    }
    Ok(CollectiveKey {
        public,
        members: members.iter().map(|(id, _)| id.clone()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ciphertext<G: Group> {
    pub c1: G::Point,
    pub c2: G::Point,
}

impl<G: Group> Ciphertext<G> {
    /// Encryption of zero with zero randomness. Additive identity.
    pub fn zero() -> Self {
        Ciphertext {
            c1: G::identity(),
            c2: G::identity(),
        }
    }

    /// Publicly known encryption `(0, mB)`, used for values that are not
    /// secret but must enter homomorphic computations.
    pub fn trivial(m: &G::Scalar) -> Self {
        Ciphertext {
            c1: G::identity(),
            c2: G::mul_base(m),
        }
    }

    /// Adds a fresh encryption of zero: `(C1 + rB, C2 + rK)`.
    pub fn rerandomize(&self, pk: &G::Point, r: &G::Scalar) -> Self {
        Ciphertext {
            c1: self.c1 + G::mul_base(r),
            c2: self.c2 + *pk * *r,
        }
    }

    pub fn scale(&self, s: &G::Scalar) -> Self {
        Ciphertext {
            c1: self.c1 * *s,
            c2: self.c2 * *s,
        }
    }
}

impl<G: Group> Default for Ciphertext<G> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<G: Group> Add for Ciphertext<G> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Ciphertext {
            c1: self.c1 + o.c1,
            c2: self.c2 + o.c2,
        }
    }
}

impl<G: Group> AddAssign for Ciphertext<G> {
    fn add_assign(&mut self, o: Self) {
        self.c1 += o.c1;
        self.c2 += o.c2;
    }
}

impl<G: Group> Sub for Ciphertext<G> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Ciphertext {
            c1: self.c1 - o.c1,
            c2: self.c2 - o.c2,
        }
    }
}

impl<G: Group> Neg for Ciphertext<G> {
    type Output = Self;
    fn neg(self) -> Self {
        Ciphertext {
            c1: -self.c1,
            c2: -self.c2,
        }
    }
}

impl<G: Group> Mul<i64> for Ciphertext<G> {
    type Output = Self;
    fn mul(self, alpha: i64) -> Self {
        scalar_mul_ct(alpha, &self)
    }
}

impl<G: Group> Encode for Ciphertext<G> {
    fn encode(&self, w: &mut Writer) {
        w.point::<G>(&self.c1).point::<G>(&self.c2);
    }
}

impl<G: Group> Decode for Ciphertext<G> {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        Ok(Ciphertext {
            c1: r.point::<G>()?,
            c2: r.point::<G>()?,
        })
    }
}

pub fn encode_ciphertexts<G: Group>(w: &mut Writer, cts: &[Ciphertext<G>]) {
    w.len(cts.len());
    for c in cts {
        c.encode(w);
    }
}

pub fn decode_ciphertexts<G: Group>(r: &mut Reader<'_>) -> Result<Vec<Ciphertext<G>>, WireError> {
    let n = r.count(2 * G::POINT_LEN)?;
    (0..n).map(|_| Ciphertext::decode(r)).collect()
}

fn check_bound(m: i64, max_message: u64) -> Result<(), ElGamalError> {
    if m.unsigned_abs() > max_message {
        return Err(ElGamalError::MessageTooLarge {
            m: m as i128,
            max: max_message,
        });
    }
    Ok(())
}

/// `E_pk(m)` with a fresh nonce, rejecting messages the decoder could not
/// recover.
pub fn encrypt<G: Group, R: RngCore + CryptoRng + ?Sized>(
    pk: &G::Point,
    m: i64,
    max_message: u64,
    rng: &mut R,
) -> Result<Ciphertext<G>, ElGamalError> {
    check_bound(m, max_message)?;
    Ok(encrypt_scalar(pk, &G::scalar_from_i64(m), rng))
}

/// Encrypts an arbitrary scalar. Used for bitwise encodings where the querier
/// only tests the plaintext against zero.
pub fn encrypt_scalar<G: Group, R: RngCore + CryptoRng + ?Sized>(
    pk: &G::Point,
    m: &G::Scalar,
    rng: &mut R,
) -> Ciphertext<G> {
    let r = G::scalar_random(rng);
    encrypt_with_nonce(pk, m, &r)
}

/// Deterministic encryption with caller-chosen nonce `r`. Range proofs need
/// the nonce of the committed value.
pub fn encrypt_with_nonce<G: Group>(pk: &G::Point, m: &G::Scalar, r: &G::Scalar) -> Ciphertext<G> {
    Ciphertext {
        c1: G::mul_base(r),
        c2: G::mul_base(m) + *pk * *r,
    }
}

/// `C2 - sk * C1 = mB`.
pub fn decrypt_point<G: Group>(ct: &Ciphertext<G>, sk: &G::Scalar) -> G::Point {
    ct.c2 - ct.c1 * *sk
}

pub fn decrypt<G: Group>(
    ct: &Ciphertext<G>,
    sk: &G::Scalar,
    table: &DlogTable<G>,
) -> Result<i64, ElGamalError> {
    Ok(table.lookup(&decrypt_point(ct, sk))?)
}

/// True when the ciphertext decrypts to zero; bitwise results and obfuscated
/// values are only ever tested this way.
pub fn decrypts_to_zero<G: Group>(ct: &Ciphertext<G>, sk: &G::Scalar) -> bool {
    decrypt_point(ct, sk) == G::identity()
}

pub fn add<G: Group>(a: &Ciphertext<G>, b: &Ciphertext<G>) -> Ciphertext<G> {
    *a + *b
}

pub fn scalar_mul_ct<G: Group>(alpha: i64, ct: &Ciphertext<G>) -> Ciphertext<G> {
    ct.scale(&G::scalar_from_i64(alpha))
}

/// Default fixed-point scale factor (two decimal digits).
pub const DEFAULT_SCALE: i64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FixedPoint {
    pub raw: i64,
    pub scale: i64,
}

impl FixedPoint {
    pub fn to_f64(self) -> f64 {
        self.raw as f64 / self.scale as f64
    }
}

/// `round(x * scale)`, rounding half away from zero.
pub fn fixed_encode(x: f64, scale: i64, max_message: u64) -> Result<FixedPoint, ElGamalError> {
    assert!(scale > 0, "fixed-point scale must be positive");
    let v = x * scale as f64;
    if !v.is_finite() {
        return Err(ElGamalError::NotFinite);
    }
    // f64::round rounds half away from zero.
    let r = v.round();
    if r.abs() > max_message as f64 {
        return Err(ElGamalError::MessageTooLarge {
            m: r as i128,
            max: max_message,
        });
    }
    Ok(FixedPoint {
        raw: r as i64,
        scale,
    })
}

pub fn fixed_decode(fp: FixedPoint) -> f64 {
    fp.to_f64()
}
