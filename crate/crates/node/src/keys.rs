//! Key material for every node, derived deterministically from the
//! configuration seed and the node identity.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use veriquery::elgamal::{collective_key, KeyPair};
use veriquery::group::Group;
use veriquery::sign::{self, SigningKey, VerifyingKey};
use veriquery::zkp::range::{range_keygen, RangeSignatures};

use crate::config::Config;
use crate::HarnessError;

/// A ChaCha stream bound to `(seed, node, purpose)`.
pub fn node_rng(seed: u64, node: &str, purpose: &str) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"veriquery/node-rng");
    h.update(seed.to_le_bytes());
    for part in [node, purpose] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    ChaCha20Rng::from_seed(h.finalize().into())
}

#[derive(Debug, Clone)]
pub struct Keyring<G: Group> {
    pub signing: BTreeMap<String, SigningKey>,
    /// ElGamal keys of the CNs and the querier.
    pub elgamal: BTreeMap<String, KeyPair<G>>,
    pub collective: G::Point,
    /// Digit signatures of all CNs in tree order; only for pairing profiles.
    pub range: Option<RangeSignatures<G>>,
}

impl<G: Group> Keyring<G> {
    pub fn derive(config: &Config, seed: u64) -> Result<Self, HarnessError> {
        let signing = config
            .addresses()
            .into_iter()
            .map(|(id, _)| {
                let k = sign::generate(&mut node_rng(seed, &id, "signing"));
                (id, k)
            })
            .collect();
        let mut cns = config.cn_ids();
        cns.sort();
        let mut elgamal = BTreeMap::new();
        for id in cns.iter().chain(std::iter::once(&config.querier.id)) {
            elgamal.insert(id.clone(), KeyPair::generate(&mut node_rng(seed, id, "elgamal")));
        }
        let members: Vec<(String, G::Point)> = cns.iter().map(|id| (id.clone(), *elgamal[id].public())).collect();
        let collective = collective_key::<G>(&members)?.public;
        let range = if G::supports_pairing() {
            let keys = cns
                .iter()
                .map(|id| range_keygen::<G, _>(config.range_base, &mut node_rng(seed, id, "range")).map(|(_, k)| k))
                .collect::<Result<Vec<_>, _>>()?;
            Some(RangeSignatures {
                u: config.range_base,
                cns: keys,
            })
        } else {
            None
        };
        Ok(Keyring {
            signing,
            elgamal,
            collective,
            range,
        })
    }

    pub fn verifying(&self) -> BTreeMap<String, VerifyingKey> {
        self.signing.iter().map(|(id, k)| (id.clone(), k.verifying_key())).collect()
    }

    /// Public keys as hex, for `keygen`.
    pub fn public_summary(&self) -> PublicKeys {
        PublicKeys {
            profile: G::NAME.to_string(),
            collective_key: hex::encode(G::encode_point(&self.collective)),
            elgamal: self
                .elgamal
                .iter()
                .map(|(id, k)| (id.clone(), hex::encode(G::encode_point(k.public()))))
                .collect(),
            signing: self
                .signing
                .iter()
                .map(|(id, k)| (id.clone(), hex::encode(k.verifying_key().as_bytes())))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PublicKeys {
    pub profile: String,
    pub collective_key: String,
    pub elgamal: BTreeMap<String, String>,
    pub signing: BTreeMap<String, String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;
    use veriquery::group::{Bn254, Ristretto};

    #[test]
    fn derivation_is_deterministic_and_separated() {
        assert_eq!(
            node_rng(1, "cn0", "x").next_u64(),
            node_rng(1, "cn0", "x").next_u64()
        );
        assert_ne!(node_rng(1, "cn0", "x").next_u64(), node_rng(2, "cn0", "x").next_u64());
        assert_ne!(node_rng(1, "cn0", "x").next_u64(), node_rng(1, "cn0x", "").next_u64());
        let c = Config::local(3, 2, 2);
        let a = Keyring::<Ristretto>::derive(&c, 5).unwrap();
        let b = Keyring::<Ristretto>::derive(&c, 5).unwrap();
        assert_eq!(a.collective, b.collective);
        assert!(a.range.is_none());
        let sum = a.elgamal["cn0"].public().clone() + *a.elgamal["cn1"].public() + *a.elgamal["cn2"].public();
        assert_eq!(sum, a.collective);
        assert_eq!(a.signing.len(), 1 + 3 + 2 + 2);
    }

    #[test]
    fn pairing_profile_has_range_keys() {
        let c = Config::local(2, 1, 1);
        let k = Keyring::<Bn254>::derive(&c, 0).unwrap();
        let sigs = k.range.unwrap();
        assert_eq!(sigs.cns.len(), 2);
        assert!(sigs.well_formed().unwrap());
    }
}
