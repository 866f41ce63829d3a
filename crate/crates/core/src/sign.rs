//! Ed25519 signatures over domain-separated messages, used to authenticate
//! proofs, queries and blocks.

use ed25519_dalek::{Signer, Verifier};
use rand::{CryptoRng, RngCore};

pub use ed25519_dalek::{SigningKey, VerifyingKey, SIGNATURE_LENGTH};

pub fn generate<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> SigningKey {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    SigningKey::from_bytes(&seed)
}

fn framed(domain: &[u8], msg: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + domain.len() + msg.len());
    out.extend_from_slice(&(domain.len() as u64).to_le_bytes());
    out.extend_from_slice(domain);
    out.extend_from_slice(msg);
    out
}

pub fn sign(key: &SigningKey, domain: &[u8], msg: &[u8]) -> Vec<u8> {
    key.sign(&framed(domain, msg)).to_bytes().to_vec()
}

pub fn verify(key: &VerifyingKey, domain: &[u8], msg: &[u8], sig: &[u8]) -> bool {
    let Ok(bytes) = <[u8; SIGNATURE_LENGTH]>::try_from(sig) else {
        return false;
    };
    key.verify(&framed(domain, msg), &ed25519_dalek::Signature::from_bytes(&bytes))
        .is_ok()
}

pub fn verifying_key_from_bytes(bytes: &[u8]) -> Option<VerifyingKey> {
    VerifyingKey::from_bytes(bytes.try_into().ok()?).ok()
}
