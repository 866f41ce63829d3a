use ark_bn254::{Bn254 as Curve, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{CurveGroup, Group as _};
use ark_ff::{Field, One, PrimeField, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use rand::{CryptoRng, RngCore};

use super::{Group, GroupError, Profile};

/// G1 of the BN254 pairing-friendly curve, paired with G2 into GT.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Bn254;

fn serialize<T: CanonicalSerialize>(t: &T) -> Vec<u8> {
    let mut out = Vec::with_capacity(t.compressed_size());
    t.serialize_compressed(&mut out)
        .expect("serialization into a Vec cannot fail");
    out
}

fn deserialize<T: CanonicalDeserialize + CanonicalSerialize>(
    bytes: &[u8],
    len: usize,
    what: &'static str,
) -> Result<T, GroupError> {
    if bytes.len() != len {
        return Err(GroupError::Malformed { what });
    }
    T::deserialize_compressed(bytes).map_err(|_| GroupError::Malformed { what })
}

impl Group for Bn254 {
    type Scalar = Fr;
    type Point = G1Projective;
    type G2 = G2Projective;
    type Target = PairingOutput<Curve>;

    const NAME: &'static str = "bn254";
    const PROFILE: Profile = Profile::Bn254;
    const SCALAR_LEN: usize = 32;
    const POINT_LEN: usize = 32;
    const G2_LEN: usize = 64;
    const TARGET_LEN: usize = 384;

    fn generator() -> G1Projective {
        G1Projective::generator()
    }

    fn identity() -> G1Projective {
        G1Projective::zero()
    }

    fn scalar_zero() -> Fr {
        Fr::zero()
    }

    fn scalar_one() -> Fr {
        Fr::one()
    }

    fn scalar_from_u64(v: u64) -> Fr {
        Fr::from(v)
    }

    fn scalar_invert(s: &Fr) -> Option<Fr> {
        s.inverse()
    }

    fn scalar_random<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Fr {
        let mut wide = [0u8; 64];
        rng.fill_bytes(&mut wide);
        Fr::from_le_bytes_mod_order(&wide)
    }

    fn scalar_from_wide(bytes: &[u8; 64]) -> Fr {
        Fr::from_le_bytes_mod_order(bytes)
    }

    fn encode_scalar(s: &Fr) -> Vec<u8> {
        serialize(s)
    }

    fn decode_scalar(bytes: &[u8]) -> Result<Fr, GroupError> {
        deserialize(bytes, Self::SCALAR_LEN, "scalar")
    }

    fn encode_point(p: &G1Projective) -> Vec<u8> {
        serialize(&p.into_affine())
    }

    fn decode_point(bytes: &[u8]) -> Result<G1Projective, GroupError> {
        deserialize::<G1Affine>(bytes, Self::POINT_LEN, "point").map(Into::into)
    }

    fn g2_generator() -> Result<G2Projective, GroupError> {
        Ok(G2Projective::generator())
    }

    fn g2_mul(p: &G2Projective, s: &Fr) -> G2Projective {
        *p * s
    }

    fn g2_add(a: &G2Projective, b: &G2Projective) -> G2Projective {
        *a + b
    }

    fn encode_g2(p: &G2Projective) -> Vec<u8> {
        serialize(&p.into_affine())
    }

    fn decode_g2(bytes: &[u8]) -> Result<G2Projective, GroupError> {
        deserialize::<G2Affine>(bytes, Self::G2_LEN, "g2 point").map(Into::into)
    }

    fn pairing(p: &G1Projective, q: &G2Projective) -> Result<PairingOutput<Curve>, GroupError> {
        Ok(Curve::pairing(*p, *q))
    }

    fn multi_pairing(
        pairs: &[(G1Projective, G2Projective)],
    ) -> Result<PairingOutput<Curve>, GroupError> {
        let g1: Vec<G1Affine> = pairs.iter().map(|(a, _)| a.into_affine()).collect();
        let g2: Vec<G2Affine> = pairs.iter().map(|(_, b)| b.into_affine()).collect();
        Ok(Curve::multi_pairing(g1, g2))
    }

    fn target_identity() -> PairingOutput<Curve> {
        PairingOutput::zero()
    }

    fn encode_target(t: &PairingOutput<Curve>) -> Vec<u8> {
        serialize(t)
    }

    fn decode_target(bytes: &[u8]) -> Result<PairingOutput<Curve>, GroupError> {
        deserialize(bytes, Self::TARGET_LEN, "target element")
    }
}
