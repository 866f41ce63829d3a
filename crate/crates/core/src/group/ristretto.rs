use std::ops::{Add, Mul, Neg, Sub};

use curve25519_dalek::constants::{RISTRETTO_BASEPOINT_POINT, RISTRETTO_BASEPOINT_TABLE};
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use rand::{CryptoRng, RngCore};

use super::{Group, GroupError, Profile};

/// Ristretto255 prime-order group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Ristretto;

/// Placeholder for the absent pairing groups. Never constructed by the
/// backend: every entry point that would produce one fails first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NoPairing;

impl Add for NoPairing {
    type Output = NoPairing;
    fn add(self, _: NoPairing) -> NoPairing {
        NoPairing
    }
}

impl Sub for NoPairing {
    type Output = NoPairing;
    fn sub(self, _: NoPairing) -> NoPairing {
        NoPairing
    }
}

impl Neg for NoPairing {
    type Output = NoPairing;
    fn neg(self) -> NoPairing {
        NoPairing
    }
}

impl Mul<Scalar> for NoPairing {
    type Output = NoPairing;
    fn mul(self, _: Scalar) -> NoPairing {
        NoPairing
    }
}

const NO_PAIRING: GroupError = GroupError::PairingUnavailable(Ristretto::NAME);

impl Group for Ristretto {
    type Scalar = Scalar;
    type Point = RistrettoPoint;
    type G2 = NoPairing;
    type Target = NoPairing;

    const NAME: &'static str = "ristretto255";
    const PROFILE: Profile = Profile::Ristretto;
    const SCALAR_LEN: usize = 32;
    const POINT_LEN: usize = 32;
    const G2_LEN: usize = 0;
    const TARGET_LEN: usize = 0;

    fn generator() -> RistrettoPoint {
        RISTRETTO_BASEPOINT_POINT
    }

    fn identity() -> RistrettoPoint {
        RistrettoPoint::identity()
    }

    fn mul_base(s: &Scalar) -> RistrettoPoint {
        s * RISTRETTO_BASEPOINT_TABLE
    }

    fn scalar_zero() -> Scalar {
        Scalar::ZERO
    }

    fn scalar_one() -> Scalar {
        Scalar::ONE
    }

    fn scalar_from_u64(v: u64) -> Scalar {
        Scalar::from(v)
    }

    fn scalar_invert(s: &Scalar) -> Option<Scalar> {
        if *s == Scalar::ZERO {
            None
        } else {
            Some(s.invert())
        }
    }

    fn scalar_random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Scalar {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Scalar::from_bytes_mod_order_wide(&wide)
    }

    fn scalar_from_wide(bytes: &[u8; 64]) -> Scalar {
        Scalar::from_bytes_mod_order_wide(bytes)
    }

    fn encode_scalar(s: &Scalar) -> Vec<u8> {
        s.to_bytes().to_vec()
    }

    fn decode_scalar(bytes: &[u8]) -> Result<Scalar, GroupError> {
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|_| GroupError::Malformed { what: "scalar" })?;
        Option::from(Scalar::from_canonical_bytes(arr)).ok_or(GroupError::Malformed { what: "scalar" })
    }

    fn encode_point(p: &RistrettoPoint) -> Vec<u8> {
        p.compress().to_bytes().to_vec()
    }

    fn decode_point(bytes: &[u8]) -> Result<RistrettoPoint, GroupError> {
        CompressedRistretto::from_slice(bytes)
            .ok()
            .and_then(|c| c.decompress())
            .ok_or(GroupError::Malformed { what: "point" })
    }

    fn g2_generator() -> Result<NoPairing, GroupError> {
        Err(NO_PAIRING)
    }

    fn g2_mul(_: &NoPairing, _: &Scalar) -> NoPairing {
        NoPairing
    }

    fn g2_add(_: &NoPairing, _: &NoPairing) -> NoPairing {
        NoPairing
    }

    fn encode_g2(_: &NoPairing) -> Vec<u8> {
        Vec::new()
    }

    fn decode_g2(_: &[u8]) -> Result<NoPairing, GroupError> {
        Err(NO_PAIRING)
    }

    fn pairing(_: &RistrettoPoint, _: &NoPairing) -> Result<NoPairing, GroupError> {
        Err(NO_PAIRING)
    }

    fn multi_pairing(_: &[(RistrettoPoint, NoPairing)]) -> Result<NoPairing, GroupError> {
        Err(NO_PAIRING)
    }

    fn target_identity() -> NoPairing {
        NoPairing
    }

    fn encode_target(_: &NoPairing) -> Vec<u8> {
        Vec::new()
    }

    fn decode_target(_: &[u8]) -> Result<NoPairing, GroupError> {
        Err(NO_PAIRING)
    }
}
