//! Sigma-protocol proofs of knowledge of `y` with `sum_k A_{e,k} y_k = A_e`
//! for every equation `e` of a statement, made non-interactive with
//! Fiat–Shamir.

use rand::{CryptoRng, RngCore};

use super::transcript::Transcript;
use super::{tag, ZkpError};
use crate::elgamal::Ciphertext;
use crate::group::Group;
use crate::wire::{Decode, Encode, Reader, WireError, Writer};

pub const LABEL_KEY_SWITCH: &[u8] = b"veriquery/linear/key-switch";
pub const LABEL_OBFUSCATION: &[u8] = b"veriquery/linear/obfuscation";

/// One equation `target = sum_k coeffs[k] * y_k`. Witnesses absent from an
/// equation carry the identity as coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Equation<G: Group> {
    pub target: G::Point,
    pub coeffs: Vec<G::Point>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearStatement<G: Group> {
    pub equations: Vec<Equation<G>>,
}

impl<G: Group> LinearStatement<G> {
    pub fn witness_count(&self) -> usize {
        self.equations.first().map_or(0, |e| e.coeffs.len())
    }

    fn well_formed(&self) -> bool {
        let w = self.witness_count();
        w > 0 && self.equations.iter().all(|e| e.coeffs.len() == w)
    }

    pub fn is_satisfied_by(&self, y: &[G::Scalar]) -> bool {
        self.well_formed()
            && y.len() == self.witness_count()
            && self.equations.iter().all(|e| combine::<G>(&e.coeffs, y) == e.target)
    }

    fn absorb(&self, t: &mut Transcript) {
        t.append_u64(b"equations", self.equations.len() as u64);
        t.append_u64(b"witnesses", self.witness_count() as u64);
        for e in &self.equations {
            t.append_point::<G>(b"A", &e.target);
            t.append_points::<G>(b"A_k", &e.coeffs);
        }
    }
}

/// Key-switch share statement with witnesses `(k_i, alpha_i)`:
/// `K_i = k_i B`, `w1 = alpha_i B`, `w2 = k_i (-C1) + alpha_i K'`.
pub fn key_switch_statement<G: Group>(
    k_i: &G::Point,
    c1: &G::Point,
    target_pk: &G::Point,
    w1: &G::Point,
    w2: &G::Point,
) -> LinearStatement<G> {
    let b = G::generator();
    let o = G::identity();
    LinearStatement {
        equations: vec![
            Equation { target: *k_i, coeffs: vec![b, o] },
            Equation { target: *w1, coeffs: vec![o, b] },
            Equation { target: *w2, coeffs: vec![-*c1, *target_pk] },
        ],
    }
}

/// Obfuscation statement with witness `s`: `C1' = s C1`, `C2' = s C2`.
pub fn obfuscation_statement<G: Group>(
    input: &Ciphertext<G>,
    output: &Ciphertext<G>,
) -> LinearStatement<G> {
    LinearStatement {
        equations: vec![
            Equation { target: output.c1, coeffs: vec![input.c1] },
            Equation { target: output.c2, coeffs: vec![input.c2] },
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearRelationProof<G: Group> {
    pub statement: LinearStatement<G>,
    pub commitments: Vec<G::Point>,
    pub responses: Vec<G::Scalar>,
    pub challenge: G::Scalar,
}

fn combine<G: Group>(coeffs: &[G::Point], y: &[G::Scalar]) -> G::Point {
    coeffs
        .iter()
        .zip(y)
        .fold(G::identity(), |acc, (a, s)| acc + *a * *s)
}

fn challenge<G: Group>(label: &[u8], st: &LinearStatement<G>, commitments: &[G::Point]) -> G::Scalar {
    let mut t = Transcript::new(label);
    st.absorb(&mut t);
    t.append_points::<G>(b"T", commitments);
    t.challenge_scalar::<G>(b"c")
}

pub fn prove_linear<G: Group, R: RngCore + CryptoRng + ?Sized>(
    y: &[G::Scalar],
    statement: LinearStatement<G>,
    label: &[u8],
    rng: &mut R,
) -> LinearRelationProof<G> {
    let nonces: Vec<G::Scalar> = (0..y.len()).map(|_| G::scalar_random(rng)).collect();
    prove_linear_with_nonces(y, statement, label, &nonces)
}

/// Deterministic variant: identical inputs give identical proofs.
pub fn prove_linear_with_nonces<G: Group>(
    y: &[G::Scalar],
    statement: LinearStatement<G>,
    label: &[u8],
    nonces: &[G::Scalar],
) -> LinearRelationProof<G> {
    debug_assert!(statement.is_satisfied_by(y), "statement not satisfied by witness");
    prove_unchecked(y, statement, label, nonces)
}

fn prove_unchecked<G: Group>(
    y: &[G::Scalar],
    statement: LinearStatement<G>,
    label: &[u8],
    nonces: &[G::Scalar],
) -> LinearRelationProof<G> {
    assert_eq!(nonces.len(), y.len());
    let commitments: Vec<G::Point> = statement
        .equations
        .iter()
        .map(|e| combine::<G>(&e.coeffs, nonces))
        .collect();
    let c = challenge(label, &statement, &commitments);
    let responses = nonces.iter().zip(y).map(|(t, y)| *t + c * *y).collect();
    LinearRelationProof {
        statement,
        commitments,
        responses,
        challenge: c,
    }
}

/// Checks `sum_k A_{e,k} z_k = T_e + c A_e` for every equation and that `c`
/// is the Fiat–Shamir hash of the statement and commitments.
pub fn verify_linear<G: Group>(proof: &LinearRelationProof<G>, label: &[u8]) -> bool {
    let st = &proof.statement;
    if !st.well_formed()
        || proof.commitments.len() != st.equations.len()
        || proof.responses.len() != st.witness_count()
    {
        return false;
    }
    if challenge(label, st, &proof.commitments) != proof.challenge {
        return false;
    }
    let c = proof.challenge;
    st.equations
        .iter()
        .zip(&proof.commitments)
        .all(|(e, t)| combine::<G>(&e.coeffs, &proof.responses) == *t + e.target * c)
}

impl<G: Group> Encode for LinearRelationProof<G> {
    fn encode(&self, w: &mut Writer) {
        w.u8(tag::LINEAR);
        w.len(self.statement.equations.len());
        w.len(self.statement.witness_count());
        for e in &self.statement.equations {
            w.point::<G>(&e.target);
            for a in &e.coeffs {
                w.point::<G>(a);
            }
        }
        for t in &self.commitments {
            w.point::<G>(t);
        }
        for z in &self.responses {
            w.scalar::<G>(z);
        }
        w.scalar::<G>(&self.challenge);
    }
}

impl<G: Group> Decode for LinearRelationProof<G> {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let t = r.u8()?;
        if t != tag::LINEAR {
            return Err(WireError::UnknownTag { what: "linear proof", tag: t });
        }
        let rows = r.count(G::POINT_LEN)?;
        let width = r.count(0)?;
        if width == 0 || rows.saturating_mul(width) > r.remaining() / G::POINT_LEN {
            return Err(WireError::TooLong(width));
        }
        let mut equations = Vec::with_capacity(rows);
        for _ in 0..rows {
            let target = r.point::<G>()?;
            let coeffs = (0..width).map(|_| r.point::<G>()).collect::<Result<_, _>>()?;
            equations.push(Equation { target, coeffs });
        }
        let commitments = (0..rows).map(|_| r.point::<G>()).collect::<Result<_, _>>()?;
        let responses = (0..width).map(|_| r.scalar::<G>()).collect::<Result<_, _>>()?;
        let challenge = r.scalar::<G>()?;
        Ok(LinearRelationProof {
            statement: LinearStatement { equations },
            commitments,
            responses,
            challenge,
        })
    }
}

/// Decodes and verifies serialized proof bytes.
pub fn verify_linear_bytes<G: Group>(bytes: &[u8], label: &[u8]) -> Result<bool, ZkpError> {
    let proof = LinearRelationProof::<G>::from_bytes(bytes)?;
    Ok(verify_linear(&proof, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elgamal::{encrypt, KeyPair};
    use crate::group::tests::rng;
    use crate::group::{Bn254, Ristretto};
    use crate::zkp::tests::{contains, flip_bit};
    use rand::Rng;

    type R = Ristretto;

    fn key_switch_case<G: Group>(
        rng: &mut rand_chacha::ChaCha20Rng,
    ) -> (Vec<G::Scalar>, LinearStatement<G>) {
        let k = G::scalar_random(rng);
        let alpha = G::scalar_random(rng);
        let c1 = G::mul_base(&G::scalar_random(rng));
        let target = G::mul_base(&G::scalar_random(rng));
        let st = key_switch_statement::<G>(
            &G::mul_base(&k),
            &c1,
            &target,
            &G::mul_base(&alpha),
            &(-c1 * k + target * alpha),
        );
        (vec![k, alpha], st)
    }

    #[test]
    fn key_switch_completeness() {
        let mut rng = rng();
        for _ in 0..100 {
            let (y, st) = key_switch_case::<R>(&mut rng);
            let p = prove_linear(&y, st, LABEL_KEY_SWITCH, &mut rng);
            assert!(verify_linear(&p, LABEL_KEY_SWITCH));
            assert!(!verify_linear(&p, LABEL_OBFUSCATION));
        }
        let (y, st) = key_switch_case::<Bn254>(&mut rng);
        let p = prove_linear(&y, st, LABEL_KEY_SWITCH, &mut rng);
        assert!(verify_linear(&p, LABEL_KEY_SWITCH));
    }

    #[test]
    fn obfuscation_relation() {
        let mut rng = rng();
        let kp = KeyPair::<R>::generate(&mut rng);
        for m in [0i64, 1, -5, 999] {
            let ct = encrypt::<R, _>(kp.public(), m, 1 << 20, &mut rng).unwrap();
            let s = R::scalar_random(&mut rng);
            let out = ct.scale(&s);
            let p = prove_linear(&[s], obfuscation_statement(&ct, &out), LABEL_OBFUSCATION, &mut rng);
            assert!(verify_linear(&p, LABEL_OBFUSCATION));
            // claimed output not a multiple by the same scalar
            let bad = Ciphertext { c1: out.c1, c2: out.c2 + R::generator() };
            let st = obfuscation_statement(&ct, &bad);
            let forged = prove_unchecked(&[s], st, LABEL_OBFUSCATION, &[s + s]);
            assert!(!verify_linear(&forged, LABEL_OBFUSCATION));
        }
    }

    #[test]
    fn tampering_rejected() {
        let mut rng = rng();
        let (y, st) = key_switch_case::<R>(&mut rng);
        let p = prove_linear(&y, st, LABEL_KEY_SWITCH, &mut rng);

        let mut q = p.clone();
        q.responses[0] = q.responses[0] + R::scalar_one();
        assert!(!verify_linear(&q, LABEL_KEY_SWITCH));

        // swap A_1 and A_2 in the last equation
        let mut q = p.clone();
        q.statement.equations[2].coeffs.swap(0, 1);
        assert!(!verify_linear(&q, LABEL_KEY_SWITCH));

        let mut q = p.clone();
        q.challenge = q.challenge + R::scalar_one();
        assert!(!verify_linear(&q, LABEL_KEY_SWITCH));

        let mut q = p;
        q.responses.pop();
        assert!(!verify_linear(&q, LABEL_KEY_SWITCH));
    }

    #[test]
    fn bit_flip_fuzz() {
        let mut rng = rng();
        let (y, st) = key_switch_case::<R>(&mut rng);
        let bytes = prove_linear(&y, st, LABEL_KEY_SWITCH, &mut rng).to_bytes();
        assert!(verify_linear_bytes::<R>(&bytes, LABEL_KEY_SWITCH).unwrap());
        let mut accepted = 0;
        for _ in 0..1000 {
            let pos = rng.gen_range(0..bytes.len() * 8);
            if let Ok(true) = verify_linear_bytes::<R>(&flip_bit(&bytes, pos), LABEL_KEY_SWITCH) {
                accepted += 1;
            }
        }
        assert_eq!(accepted, 0);
    }

    #[test]
    fn deterministic_and_hiding() {
        let mut rng = rng();
        let (y, st) = key_switch_case::<R>(&mut rng);
        let nonces = [R::scalar_random(&mut rng), R::scalar_random(&mut rng)];
        let a = prove_linear_with_nonces(&y, st.clone(), LABEL_KEY_SWITCH, &nonces).to_bytes();
        let b = prove_linear_with_nonces(&y, st, LABEL_KEY_SWITCH, &nonces).to_bytes();
        assert_eq!(a, b);
        for secret in &y {
            assert!(!contains(&a, &R::encode_scalar(secret)));
        }
        let p = LinearRelationProof::<R>::from_bytes(&a).unwrap();
        assert!(verify_linear(&p, LABEL_KEY_SWITCH));
    }
}
