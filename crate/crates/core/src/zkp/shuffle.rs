//! Verifiable shuffle of ElGamal ciphertexts by cut-and-choose.
//!
//! The prover publishes `outputs[i] = inputs[pi(i)] + (r_i B, r_i Omega)`.
//! For each round `k` it also commits to an intermediate shuffle
//! `I_k[i] = inputs[pi_k(i)] + (rho_k[i] B, rho_k[i] Omega)`. A challenge bit
//! per round, hashed over both lists and every intermediate, selects which
//! half is opened:
//!
//! * bit 0 reveals `(pi_k, rho_k)`, linking `I_k` to the inputs;
//! * bit 1 reveals `sigma = pi_k^{-1} o pi` and `r_i - rho_k[sigma(i)]`,
//!   linking the outputs to `I_k`.
//!
//! Either opening alone is independent of `(pi, r)`. A prover whose outputs
//! are not a re-randomized permutation of the inputs can answer at most one
//! bit per round, so a cheating proof is accepted with probability
//! `2^-rounds`.
//!
//! Serialized layout after the tag byte: `Omega`, inputs and outputs
//! (count-prefixed ciphertext lists), round count, then per round the `n`
//! intermediate ciphertexts, the opening bit, `n` permutation indices as
//! `u32` and `n` scalars.

use rand::seq::SliceRandom;
use rand::{CryptoRng, RngCore};

use super::transcript::Transcript;
use super::{tag, ZkpError};
use crate::elgamal::{decode_ciphertexts, encode_ciphertexts, Ciphertext};
use crate::group::Group;
use crate::wire::{Decode, Encode, Reader, WireError, Writer};

pub const LABEL_SHUFFLE: &[u8] = b"veriquery/shuffle";

/// Default round count; a cheating prover survives with probability `2^-64`.
pub const DEFAULT_ROUNDS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleRound<G: Group> {
    pub intermediate: Vec<Ciphertext<G>>,
    /// The challenge bit this round answers.
    pub bit: bool,
    pub perm: Vec<u32>,
    pub factors: Vec<G::Scalar>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShuffleProof<G: Group> {
    pub pk: G::Point,
    pub inputs: Vec<Ciphertext<G>>,
    pub outputs: Vec<Ciphertext<G>>,
    pub rounds: Vec<ShuffleRound<G>>,
}

fn random_perm<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn challenge_bits<G: Group>(
    pk: &G::Point,
    inputs: &[Ciphertext<G>],
    outputs: &[Ciphertext<G>],
    intermediates: &[&[Ciphertext<G>]],
) -> Vec<bool> {
    let mut t = Transcript::new(LABEL_SHUFFLE);
    t.append_point::<G>(b"Omega", pk);
    let mut absorb = |tag: &[u8], list: &[Ciphertext<G>]| {
        t.append_u64(tag, list.len() as u64);
        for c in list {
            t.append_point::<G>(tag, &c.c1);
            t.append_point::<G>(tag, &c.c2);
        }
    };
    absorb(b"in", inputs);
    absorb(b"out", outputs);
    for i in intermediates {
        absorb(b"mid", i);
    }
    t.challenge_bits(b"bits", intermediates.len())
}

/// Shuffles and re-randomizes `inputs` under `pk`, returning the new list and
/// a proof with `rounds` cut-and-choose rounds.
pub fn shuffle_and_prove<G: Group, R: RngCore + CryptoRng + ?Sized>(
    inputs: &[Ciphertext<G>],
    pk: &G::Point,
    rounds: usize,
    rng: &mut R,
) -> Result<(Vec<Ciphertext<G>>, ShuffleProof<G>), ZkpError> {
    if inputs.is_empty() {
        return Err(ZkpError::EmptyList);
    }
    if rounds == 0 {
        return Err(ZkpError::InvalidRangeParams("shuffle needs at least one round"));
    }
    let n = inputs.len();
    let pi = random_perm(n, rng);
    let r: Vec<G::Scalar> = (0..n).map(|_| G::scalar_random(rng)).collect();
    let outputs: Vec<Ciphertext<G>> = (0..n).map(|i| inputs[pi[i]].rerandomize(pk, &r[i])).collect();

    let mut commits = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let pk_perm = random_perm(n, rng);
        let rho: Vec<G::Scalar> = (0..n).map(|_| G::scalar_random(rng)).collect();
        let mid: Vec<Ciphertext<G>> = (0..n)
            .map(|i| inputs[pk_perm[i]].rerandomize(pk, &rho[i]))
            .collect();
        commits.push((pk_perm, rho, mid));
    }
    let mids: Vec<&[Ciphertext<G>]> = commits.iter().map(|(_, _, m)| m.as_slice()).collect();
    let bits = challenge_bits(pk, inputs, &outputs, &mids);

    let rounds = commits
        .into_iter()
        .zip(bits)
        .map(|((perm_k, rho, intermediate), bit)| {
            let (perm, factors) = if bit {
                let mut inv = vec![0usize; n];
                for (i, &p) in perm_k.iter().enumerate() {
                    inv[p] = i;
                }
                let sigma: Vec<usize> = (0..n).map(|i| inv[pi[i]]).collect();
                let f = (0..n).map(|i| r[i] - rho[sigma[i]]).collect();
                (sigma, f)
            } else {
                (perm_k, rho)
            };
            ShuffleRound {
                intermediate,
                bit,
                perm: perm.into_iter().map(|p| p as u32).collect(),
                factors,
            }
        })
        .collect();

    let proof = ShuffleProof {
        pk: *pk,
        inputs: inputs.to_vec(),
        outputs: outputs.clone(),
        rounds,
    };
    Ok((outputs, proof))
}

fn is_permutation(p: &[u32], n: usize) -> bool {
    let mut seen = vec![false; n];
    p.len() == n
        && p.iter().all(|&i| {
            let i = i as usize;
            i < n && !std::mem::replace(&mut seen[i], true)
        })
}

pub fn verify_shuffle<G: Group>(proof: &ShuffleProof<G>) -> bool {
    let n = proof.inputs.len();
    if n == 0 || proof.outputs.len() != n || proof.rounds.is_empty() {
        return false;
    }
    if proof
        .rounds
        .iter()
        .any(|r| r.intermediate.len() != n || r.factors.len() != n || !is_permutation(&r.perm, n))
    {
        return false;
    }
    let mids: Vec<&[Ciphertext<G>]> = proof.rounds.iter().map(|r| r.intermediate.as_slice()).collect();
    let bits = challenge_bits(&proof.pk, &proof.inputs, &proof.outputs, &mids);
    proof.rounds.iter().zip(bits).all(|(round, bit)| {
        if round.bit != bit {
            return false;
        }
        let (from, to) = if bit {
            (&round.intermediate, &proof.outputs)
        } else {
            (&proof.inputs, &round.intermediate)
        };
        (0..n).all(|i| to[i] == from[round.perm[i] as usize].rerandomize(&proof.pk, &round.factors[i]))
    })
}

impl<G: Group> Encode for ShuffleProof<G> {
    fn encode(&self, w: &mut Writer) {
        w.u8(tag::SHUFFLE).point::<G>(&self.pk);
        encode_ciphertexts(w, &self.inputs);
        encode_ciphertexts(w, &self.outputs);
        w.len(self.rounds.len());
        for r in &self.rounds {
            for c in &r.intermediate {
                c.encode(w);
            }
            w.u8(r.bit as u8);
            for &p in &r.perm {
                w.u32(p);
            }
            for f in &r.factors {
                w.scalar::<G>(f);
            }
        }
    }
}

impl<G: Group> Decode for ShuffleProof<G> {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let t = r.u8()?;
        if t != tag::SHUFFLE {
            return Err(WireError::UnknownTag { what: "shuffle proof", tag: t });
        }
        let pk = r.point::<G>()?;
        let inputs = decode_ciphertexts::<G>(r)?;
        let outputs = decode_ciphertexts::<G>(r)?;
        let n = inputs.len();
        let per_round = 1 + n * (2 * G::POINT_LEN + 4 + G::SCALAR_LEN);
        let count = r.count(per_round)?;
        let mut rounds = Vec::with_capacity(count);
        for _ in 0..count {
            let intermediate = (0..n).map(|_| Ciphertext::decode(r)).collect::<Result<_, _>>()?;
            let bit = match r.u8()? {
                0 => false,
                1 => true,
                t => return Err(WireError::UnknownTag { what: "shuffle opening", tag: t }),
            };
            let perm = (0..n).map(|_| r.u32()).collect::<Result<_, _>>()?;
            let factors = (0..n).map(|_| r.scalar::<G>()).collect::<Result<_, _>>()?;
            rounds.push(ShuffleRound {
                intermediate,
                bit,
                perm,
                factors,
            });
        }
        Ok(ShuffleProof {
            pk,
            inputs,
            outputs,
            rounds,
        })
    }
}
