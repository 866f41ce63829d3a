//! Collective protocols run by the computing nodes (CNs) over a tree:
//! aggregation (CTA), key switching (CTKS), obfuscation (CTO) and
//! differential-privacy noise generation (CDP).
//!
//! Each protocol has a per-node step, used by the node harness, and a
//! whole-tree driver that runs all steps in-process.

use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elgamal::{collective_key, fixed_encode, Ciphertext, ElGamalError, KeyPair};
use crate::encodings::{EncodedResponse, EncodingError};
use crate::group::Group;
use crate::wire::{Decode, Encode, Reader, WireError, Writer};
use crate::zkp::linear::{LABEL_KEY_SWITCH, LABEL_OBFUSCATION};
use crate::zkp::{
    key_switch_statement, obfuscation_statement, prove_linear, shuffle_and_prove, verify_linear,
    verify_shuffle, LinearRelationProof, ShuffleProof, ZkpError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("vector has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("ciphertext key does not match the CNs' collective key")]
    KeyMismatch,
    #[error("invalid privacy parameters: {0}")]
    InvalidPrivacyParams(String),
    #[error("need {needed} noise values, list has {have}")]
    NoiseExhausted { needed: usize, have: usize },
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error(transparent)]
    Zkp(#[from] ZkpError),
    #[error(transparent)]
    ElGamal(#[from] ElGamalError),
}

impl From<EncodingError> for ProtocolError {
    fn from(e: EncodingError) -> Self {
        match e {
            EncodingError::DimensionMismatch { expected, got } => {
                ProtocolError::DimensionMismatch { expected, got }
            }
            other => ProtocolError::InvalidTree(other.to_string()),
        }
    }
}

/// Rooted tree over CN identities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnTree {
    nodes: Vec<String>,
    parent: BTreeMap<String, Option<String>>,
    root: String,
}

impl CnTree {
    fn sorted(ids: &[String]) -> Result<Vec<String>, ProtocolError> {
        if ids.is_empty() {
            return Err(ProtocolError::InvalidTree("no nodes".into()));
        }
        let set: BTreeSet<&String> = ids.iter().collect();
        if set.len() != ids.len() {
            return Err(ProtocolError::InvalidTree("duplicate node".into()));
        }
        Ok(set.into_iter().cloned().collect())
    }

    fn from_index_parents(nodes: Vec<String>, parent_of: impl Fn(usize) -> usize) -> Self {
        let parent = nodes
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), (i > 0).then(|| nodes[parent_of(i)].clone())))
            .collect();
        let root = nodes[0].clone();
        CnTree { nodes, parent, root }
    }

    /// Balanced binary tree in heap order over the sorted identities.
    pub fn balanced(ids: &[String]) -> Result<Self, ProtocolError> {
        Ok(Self::from_index_parents(Self::sorted(ids)?, |i| (i - 1) / 2))
    }

    pub fn chain(ids: &[String]) -> Result<Self, ProtocolError> {
        Ok(Self::from_index_parents(Self::sorted(ids)?, |i| i - 1))
    }

    pub fn star(ids: &[String]) -> Result<Self, ProtocolError> {
        Ok(Self::from_index_parents(Self::sorted(ids)?, |_| 0))
    }

    pub fn from_parents(parent: BTreeMap<String, Option<String>>) -> Result<Self, ProtocolError> {
        let roots: Vec<&String> = parent.iter().filter(|(_, p)| p.is_none()).map(|(k, _)| k).collect();
        if roots.len() != 1 {
            return Err(ProtocolError::InvalidTree(format!("{} roots", roots.len())));
        }
        let root = roots[0].clone();
        for (id, p) in &parent {
            if let Some(p) = p {
                if !parent.contains_key(p) {
                    return Err(ProtocolError::UnknownNode(p.clone()));
                }
            }
            // walking up must reach the root within |nodes| steps
            let mut cur = id;
            let mut steps = 0;
            while let Some(Some(p)) = parent.get(cur) {
                cur = p;
                steps += 1;
                if steps > parent.len() {
                    return Err(ProtocolError::InvalidTree(format!("cycle through {id}")));
                }
            }
        }
        let nodes = parent.keys().cloned().collect();
        Ok(CnTree { nodes, parent, root })
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    /// Identities in sorted order.
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.parent.contains_key(id)
    }

    pub fn parent(&self, id: &str) -> Option<&str> {
        self.parent.get(id).and_then(|p| p.as_deref())
    }

    pub fn children(&self, id: &str) -> Vec<&str> {
        self.parent
            .iter()
            .filter(|(_, p)| p.as_deref() == Some(id))
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Every node after all of its descendants.
    pub fn post_order(&self) -> Vec<&str> {
        fn visit<'a>(t: &'a CnTree, id: &'a str, out: &mut Vec<&'a str>) {
            for c in t.children(id) {
                visit(t, c, out);
            }
            out.push(id);
        }
        let mut out = Vec::with_capacity(self.nodes.len());
        visit(self, &self.root, &mut out);
        out
    }
}

/// Inputs and output of one CN's aggregation step. The output must be the
/// componentwise sum of the inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregationProof<G: Group> {
    pub inputs: Vec<EncodedResponse<G>>,
    pub output: EncodedResponse<G>,
}

impl<G: Group> AggregationProof<G> {
    pub fn verify(&self) -> bool {
        let d = self.output.dimension();
        let mut acc = EncodedResponse::zero(d);
        for i in &self.inputs {
            match acc.add(i) {
                Ok(a) => acc = a,
                Err(_) => return false,
            }
        }
        acc == self.output
    }
}

impl<G: Group> Encode for AggregationProof<G> {
    fn encode(&self, w: &mut Writer) {
        w.len(self.inputs.len());
        for i in &self.inputs {
            i.encode(w);
        }
        self.output.encode(w);
    }
}

impl<G: Group> Decode for AggregationProof<G> {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let n = r.count(8)?;
        let inputs = (0..n).map(|_| EncodedResponse::decode(r)).collect::<Result<_, _>>()?;
        Ok(AggregationProof {
            inputs,
            output: EncodedResponse::decode(r)?,
        })
    }
}

/// One CN's aggregation step: sum its own DP responses and its children's
/// partial results.
pub fn cta_local<G: Group>(
    d: usize,
    inputs: Vec<EncodedResponse<G>>,
) -> Result<AggregationProof<G>, ProtocolError> {
    let mut output = EncodedResponse::zero(d);
    for i in &inputs {
        output = output.add(i)?;
    }
    Ok(AggregationProof { inputs, output })
}

/// Aggregates all contributions bottom-up. Returns the root's output and
/// one proof per CN in post-order.
pub fn cta_aggregate<G: Group>(
    tree: &CnTree,
    d: usize,
    contributions: &BTreeMap<String, Vec<EncodedResponse<G>>>,
) -> Result<(EncodedResponse<G>, Vec<(String, AggregationProof<G>)>), ProtocolError> {
    if let Some(id) = contributions.keys().find(|id| !tree.contains(id)) {
        return Err(ProtocolError::UnknownNode(id.clone()));
    }
    let mut partial: BTreeMap<&str, EncodedResponse<G>> = BTreeMap::new();
    let mut proofs = Vec::with_capacity(tree.len());
    for id in tree.post_order() {
        let mut inputs = contributions.get(id).cloned().unwrap_or_default();
        for c in tree.children(id) {
            inputs.push(partial.remove(c).expect("child visited first"));
        }
        let proof = cta_local(d, inputs)?;
        partial.insert(id, proof.output.clone());
        proofs.push((id.to_string(), proof));
    }
    Ok((partial.remove(tree.root()).expect("root visited"), proofs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeySwitchShare<G: Group> {
    pub w1: G::Point,
    pub w2: G::Point,
}

impl<G: Group> KeySwitchShare<G> {
    pub fn zero() -> Self {
        KeySwitchShare {
            w1: G::identity(),
            w2: G::identity(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        KeySwitchShare {
            w1: self.w1 + o.w1,
            w2: self.w2 + o.w2,
        }
    }

    /// The share a key-switch proof commits to.
    pub fn from_proof(p: &LinearRelationProof<G>) -> Option<Self> {
        let eq = &p.statement.equations;
        (eq.len() == 3).then(|| KeySwitchShare {
            w1: eq[1].target,
            w2: eq[2].target,
        })
    }
}

/// `w1 = αB`, `w2 = -k C1 + αK'` with a fresh `α`, and a proof of both
/// relations together with `K = kB`.
pub fn ctks_share<G: Group, R: RngCore + CryptoRng + ?Sized>(
    key: &KeyPair<G>,
    ct: &Ciphertext<G>,
    target_pk: &G::Point,
    rng: &mut R,
) -> (KeySwitchShare<G>, LinearRelationProof<G>) {
    let alpha = G::scalar_random(rng);
    let w1 = G::mul_base(&alpha);
    let w2 = -(ct.c1 * *key.secret()) + *target_pk * alpha;
    let st = key_switch_statement(key.public(), &ct.c1, target_pk, &w1, &w2);
    let proof = prove_linear(&[*key.secret(), alpha], st, LABEL_KEY_SWITCH, rng);
    (KeySwitchShare { w1, w2 }, proof)
}

/// Checks a key-switch proof against the CN's public key and the switched
/// ciphertext, returning the proven share.
pub fn verify_key_switch<G: Group>(
    proof: &LinearRelationProof<G>,
    cn_pk: &G::Point,
    c1: &G::Point,
    target_pk: &G::Point,
) -> Option<KeySwitchShare<G>> {
    let share = KeySwitchShare::from_proof(proof)?;
    let expected = key_switch_statement(cn_pk, c1, target_pk, &share.w1, &share.w2);
    (proof.statement == expected && verify_linear(proof, LABEL_KEY_SWITCH)).then_some(share)
}

/// `(Σ w1, C2 + Σ w2)`.
pub fn ctks_combine<G: Group>(ct: &Ciphertext<G>, total: &KeySwitchShare<G>) -> Ciphertext<G> {
    Ciphertext {
        c1: total.w1,
        c2: ct.c2 + total.w2,
    }
}

/// Switches `ct` from the CNs' collective key to `target_pk`. Shares are
/// summed up the tree. Returns the proofs in post-order.
pub fn ctks_switch<G: Group, R: RngCore + CryptoRng + ?Sized>(
    tree: &CnTree,
    ct: &Ciphertext<G>,
    ct_key: &G::Point,
    target_pk: &G::Point,
    cn_keys: &BTreeMap<String, KeyPair<G>>,
    rng: &mut R,
) -> Result<(Ciphertext<G>, Vec<(String, LinearRelationProof<G>)>), ProtocolError> {
    let members = tree
        .nodes()
        .iter()
        .map(|id| {
            cn_keys
                .get(id)
                .map(|k| (id.clone(), *k.public()))
                .ok_or_else(|| ProtocolError::UnknownNode(id.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if collective_key::<G>(&members)?.public != *ct_key {
        return Err(ProtocolError::KeyMismatch);
    }
    let mut partial: BTreeMap<&str, KeySwitchShare<G>> = BTreeMap::new();
    let mut proofs = Vec::with_capacity(tree.len());
    for id in tree.post_order() {
        let (mut share, proof) = ctks_share(&cn_keys[id], ct, target_pk, rng);
        for c in tree.children(id) {
            share = share.add(&partial.remove(c).expect("child visited first"));
        }
        partial.insert(id, share);
        proofs.push((id.to_string(), proof));
    }
    let total = partial.remove(tree.root()).expect("root visited");
    Ok((ctks_combine(ct, &total), proofs))
}

/// `s_i · C` with a fresh nonzero `s_i`, and a proof of the relation.
pub fn cto_share<G: Group, R: RngCore + CryptoRng + ?Sized>(
    ct: &Ciphertext<G>,
    rng: &mut R,
) -> (Ciphertext<G>, LinearRelationProof<G>) {
    let mut s = G::scalar_random(rng);
    while s == G::scalar_zero() {
        s = G::scalar_random(rng);
    }
    let out = ct.scale(&s);
    let proof = prove_linear(&[s], obfuscation_statement(ct, &out), LABEL_OBFUSCATION, rng);
    (out, proof)
}

/// Checks an obfuscation proof for `input`, returning the proven output.
pub fn verify_obfuscation<G: Group>(
    proof: &LinearRelationProof<G>,
    input: &Ciphertext<G>,
) -> Option<Ciphertext<G>> {
    let eq = &proof.statement.equations;
    if eq.len() != 2 {
        return None;
    }
    let out = Ciphertext {
        c1: eq[0].target,
        c2: eq[1].target,
    };
    (proof.statement == obfuscation_statement(input, &out) && verify_linear(proof, LABEL_OBFUSCATION))
        .then_some(out)
}

/// Obfuscates `ct` to `(Σ s_i) · ct`, summing the per-CN shares up the tree.
pub fn cto_obfuscate<G: Group, R: RngCore + CryptoRng + ?Sized>(
    tree: &CnTree,
    ct: &Ciphertext<G>,
    rng: &mut R,
) -> (Ciphertext<G>, Vec<(String, LinearRelationProof<G>)>) {
    let mut partial: BTreeMap<&str, Ciphertext<G>> = BTreeMap::new();
    let mut proofs = Vec::with_capacity(tree.len());
    for id in tree.post_order() {
        let (mut share, proof) = cto_share(ct, rng);
        for c in tree.children(id) {
            share += partial.remove(c).expect("child visited first");
        }
        partial.insert(id, share);
        proofs.push((id.to_string(), proof));
    }
    (partial.remove(tree.root()).expect("root visited"), proofs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyParams {
    pub epsilon: f64,
    /// Sensitivity `Δf`.
    pub delta_f: f64,
    /// Quantization step `θ`.
    pub theta: f64,
    /// Length of the noise list.
    pub list_len: usize,
}

impl PrivacyParams {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if !ok(self.epsilon) || !ok(self.delta_f) || !ok(self.theta) || self.list_len == 0 {
            return Err(ProtocolError::InvalidPrivacyParams(format!(
                "need ε, Δf, θ > 0 and a non-empty list, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Inverse CDF of Laplace(0, b).
pub fn laplace_quantile(p: f64, b: f64) -> f64 {
    if p < 0.5 {
        b * (2.0 * p).ln()
    } else {
        -b * (2.0 - 2.0 * p).ln()
    }
}

pub fn laplace_cdf(x: f64, b: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / b).exp()
    } else {
        1.0 - 0.5 * (-x / b).exp()
    }
}

/// Deterministic list of `l` noise values: the quantiles of
/// Laplace(0, Δf/ε) at `(i + 1/2) / l`, rounded to multiples of `θ`.
pub fn quantize_laplace(p: &PrivacyParams) -> Result<Vec<f64>, ProtocolError> {
    p.validate()?;
    let b = p.delta_f / p.epsilon;
    let l = p.list_len as f64;
    Ok((0..p.list_len)
        .map(|i| {
            let x = laplace_quantile((i as f64 + 0.5) / l, b);
            // +0.0 turns the -0.0 of negative values rounding to zero into 0
            p.theta * (x / p.theta).round() + 0.0
        })
        .collect())
}

/// [`quantize_laplace`] in fixed point with the given scale.
pub fn quantize_laplace_fixed(p: &PrivacyParams, scale: i64) -> Result<Vec<i64>, ProtocolError> {
    quantize_laplace(p)?
        .into_iter()
        .map(|x| Ok(fixed_encode(x, scale, 1 << 40)?.raw))
        .collect()
}

/// Shuffled encrypted noise list. `values` is the public pre-shuffle list.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseList<G: Group> {
    pub params: PrivacyParams,
    pub scale: i64,
    pub values: Vec<i64>,
    pub encrypted: Vec<Ciphertext<G>>,
}

/// The public starting point of the shuffle chain: trivial encryptions.
pub fn cdp_initial<G: Group>(values: &[i64]) -> Vec<Ciphertext<G>> {
    values
        .iter()
        .map(|&v| Ciphertext::trivial(&G::scalar_from_i64(v)))
        .collect()
}

/// Each CN, in identity order, shuffles and re-randomizes the list under
/// `pk`. Returns the list and the proofs in chain order.
pub fn cdp_generate<G: Group, R: RngCore + CryptoRng + ?Sized>(
    params: &PrivacyParams,
    scale: i64,
    tree: &CnTree,
    pk: &G::Point,
    rounds: usize,
    rng: &mut R,
) -> Result<(NoiseList<G>, Vec<(String, ShuffleProof<G>)>), ProtocolError> {
    let values = quantize_laplace_fixed(params, scale)?;
    let mut list = cdp_initial::<G>(&values);
    let mut proofs = Vec::with_capacity(tree.len());
    for id in tree.nodes() {
        let (out, proof) = shuffle_and_prove(&list, pk, rounds, rng)?;
        list = out;
        proofs.push((id.clone(), proof));
    }
    Ok((
        NoiseList {
            params: *params,
            scale,
            values,
            encrypted: list,
        },
        proofs,
    ))
}

/// Checks that the proofs form a valid chain starting at the trivial
/// encryption of `values` and ending at `final_list`.
pub fn verify_cdp_chain<G: Group>(
    values: &[i64],
    proofs: &[ShuffleProof<G>],
    pk: &G::Point,
    final_list: &[Ciphertext<G>],
) -> bool {
    let mut cur = cdp_initial::<G>(values);
    for p in proofs {
        if p.pk != *pk || p.inputs != cur || !verify_shuffle(p) {
            return false;
        }
        cur = p.outputs.clone();
    }
    cur == final_list
}

/// Adds the first `d` noise ciphertexts to the entries of `V`.
pub fn cdp_apply<G: Group>(
    result: &EncodedResponse<G>,
    noise: &NoiseList<G>,
) -> Result<EncodedResponse<G>, ProtocolError> {
    let d = result.dimension();
    if noise.encrypted.len() < d {
        return Err(ProtocolError::NoiseExhausted {
            needed: d,
            have: noise.encrypted.len(),
        });
    }
    Ok(EncodedResponse {
        v: result.v.iter().zip(&noise.encrypted).map(|(a, b)| *a + *b).collect(),
        c: result.c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elgamal::{decrypt, decrypt_point, encrypt, DEFAULT_SCALE};
    use crate::encodings::{encode, OperationKind, OperationSpec};
    use crate::group::tests::rng;
    use crate::group::{DlogTable, GroupError, Ristretto};
    use rand::Rng;

    type G = Ristretto;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("cn{i}")).collect()
    }

    struct Setup {
        keys: BTreeMap<String, KeyPair<G>>,
        pk: <G as Group>::Point,
    }

    fn setup(n: usize, rng: &mut impl FnMut() -> KeyPair<G>) -> Setup {
        let keys: BTreeMap<_, _> = ids(n).into_iter().map(|id| (id, rng())).collect();
        let members: Vec<_> = keys.iter().map(|(k, v)| (k.clone(), *v.public())).collect();
        let pk = collective_key::<G>(&members).unwrap().public;
        Setup { keys, pk }
    }

    #[test]
    fn tree_shapes() {
        let t = CnTree::balanced(&ids(6)).unwrap();
        assert_eq!(t.root(), "cn0");
        assert_eq!(t.children("cn0"), vec!["cn1", "cn2"]);
        assert_eq!(t.children("cn2"), vec!["cn5"]);
        assert_eq!(t.parent("cn4"), Some("cn1"));
        let order = t.post_order();
        assert_eq!(order.len(), 6);
        assert_eq!(order.last(), Some(&"cn0"));
        for id in &order {
            let pos = order.iter().position(|x| x == id).unwrap();
            for c in t.children(id) {
                assert!(order.iter().position(|x| *x == c).unwrap() < pos);
            }
        }
        assert_eq!(CnTree::chain(&ids(3)).unwrap().post_order(), vec!["cn2", "cn1", "cn0"]);
        assert_eq!(CnTree::star(&ids(4)).unwrap().children("cn0").len(), 3);
        assert!(CnTree::balanced(&[]).is_err());
        assert!(CnTree::balanced(&["a".into(), "a".into()]).is_err());

        let mut parents = BTreeMap::new();
        parents.insert("a".to_string(), None);
        parents.insert("b".to_string(), Some("c".to_string()));
        parents.insert("c".to_string(), Some("b".to_string()));
        assert!(CnTree::from_parents(parents.clone()).is_err());
        parents.insert("c".to_string(), Some("a".to_string()));
        let t = CnTree::from_parents(parents).unwrap();
        assert_eq!(t.post_order(), vec!["b", "c", "a"]);
    }

    #[test]
    fn cta_sums() {
        let mut rng = rng();
        let kp = KeyPair::<G>::generate(&mut rng);
        let table = DlogTable::<G>::new(1 << 16);
        let op = OperationSpec::new(OperationKind::Sum).with_scale(1);
        let tree = CnTree::balanced(&ids(3)).unwrap();
        let mut contributions: BTreeMap<String, Vec<EncodedResponse<G>>> = BTreeMap::new();
        let mut expected = 0i64;
        for i in 0..60 {
            let x = rng.gen_range(-1000..1000);
            expected += x;
            let r = encode::<G, _>(&op, &[vec![x as f64]], kp.public(), &mut rng).unwrap();
            contributions.entry(format!("cn{}", i % 3)).or_default().push(r);
        }
        let (out, proofs) = cta_aggregate(&tree, 1, &contributions).unwrap();
        assert_eq!(decrypt(&out.v[0], kp.secret(), &table).unwrap(), expected);
        assert_eq!(decrypt(&out.c, kp.secret(), &table).unwrap(), 60);
        assert_eq!(proofs.len(), 3);
        assert!(proofs.iter().all(|(_, p)| p.verify()));
        let (_, p) = &proofs[0];
        assert_eq!(AggregationProof::<G>::from_bytes(&p.to_bytes()).unwrap(), *p);

        let mut bad = p.clone();
        bad.output.v[0] = bad.output.v[0] + bad.output.v[0];
        assert!(!bad.verify());

        let wrong = EncodedResponse::<G>::zero(2);
        contributions.get_mut("cn0").unwrap().push(wrong);
        assert!(matches!(
            cta_aggregate(&tree, 1, &contributions),
            Err(ProtocolError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ctks_switches_to_target() {
        let mut rng = rng();
        let table = DlogTable::<G>::new(1 << 16);
        let mut fresh = {
            let mut r = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::seed_from_u64(99);
            move || KeyPair::<G>::generate(&mut r)
        };
        for n in [1, 6] {
            let s = setup(n, &mut fresh);
            let q = KeyPair::<G>::generate(&mut rng);
            let ct = encrypt(&s.pk, 7, 1 << 20, &mut rng).unwrap();
            let tree = CnTree::balanced(&ids(n)).unwrap();
            let (out, proofs) = ctks_switch(&tree, &ct, &s.pk, q.public(), &s.keys, &mut rng).unwrap();
            assert_eq!(decrypt(&out, q.secret(), &table).unwrap(), 7);
            assert_eq!(proofs.len(), n);
            for (id, p) in &proofs {
                assert!(verify_key_switch(p, s.keys[id].public(), &ct.c1, q.public()).is_some());
                // wrong key or wrong ciphertext
                assert!(verify_key_switch(p, q.public(), &ct.c1, q.public()).is_none());
                assert!(verify_key_switch(p, s.keys[id].public(), &out.c1, q.public()).is_none());
            }
            // the collective key no longer decrypts it
            let sum_sk = s
                .keys
                .values()
                .fold(G::scalar_zero(), |acc, k| acc + *k.secret());
            assert!(matches!(
                decrypt(&out, &sum_sk, &table),
                Err(ElGamalError::Group(GroupError::OutOfTableRange { .. }))
            ));
            let other = KeyPair::<G>::generate(&mut rng);
            assert_eq!(
                ctks_switch(&tree, &ct, other.public(), q.public(), &s.keys, &mut rng).unwrap_err(),
                ProtocolError::KeyMismatch
            );
        }
    }

    #[test]
    fn ctks_sweep_and_shape_independence() {
        let mut rng = rng();
        let table = DlogTable::<G>::new(1 << 16);
        let mut fresh = {
            let mut r = <rand_chacha::ChaCha20Rng as rand::SeedableRng>::seed_from_u64(99);
            move || KeyPair::<G>::generate(&mut r)
        };
        for _ in 0..40 {
            let n = rng.gen_range(1..=8);
            let s = setup(n, &mut fresh);
            let q = KeyPair::<G>::generate(&mut rng);
            let m = rng.gen_range(-10_000..=10_000);
            let ct = encrypt(&s.pk, m, 1 << 20, &mut rng).unwrap();
            for tree in [
                CnTree::balanced(&ids(n)).unwrap(),
                CnTree::chain(&ids(n)).unwrap(),
                CnTree::star(&ids(n)).unwrap(),
            ] {
                let (out, _) = ctks_switch(&tree, &ct, &s.pk, q.public(), &s.keys, &mut rng).unwrap();
                assert_eq!(decrypt(&out, q.secret(), &table).unwrap(), m);
            }
        }
    }

    #[test]
    fn cto_blinds_nonzero_and_keeps_zero() {
        let mut rng = rng();
        let kp = KeyPair::<G>::generate(&mut rng);
        let tree = CnTree::balanced(&ids(3)).unwrap();
        let zero = encrypt::<G, _>(kp.public(), 0, 1, &mut rng).unwrap();
        let (out, proofs) = cto_obfuscate(&tree, &zero, &mut rng);
        assert_eq!(decrypt_point(&out, kp.secret()), G::identity());
        assert!(proofs.iter().all(|(_, p)| verify_obfuscation(p, &zero).is_some()));
        let mut seen = BTreeSet::new();
        for _ in 0..100 {
            let one = encrypt::<G, _>(kp.public(), 1, 1, &mut rng).unwrap();
            let (out, proofs) = cto_obfuscate(&tree, &one, &mut rng);
            let pt = decrypt_point(&out, kp.secret());
            assert_ne!(pt, G::identity());
            seen.insert(G::encode_point(&pt));
            assert!(verify_obfuscation(&proofs[0].1, &zero).is_none());
        }
        assert_eq!(seen.len(), 100);
    }

    #[test]
    fn quantized_laplace_shape() {
        let p = PrivacyParams {
            epsilon: 1.0,
            delta_f: 1.0,
            theta: 0.5,
            list_len: 100,
        };
        let v = quantize_laplace(&p).unwrap();
        assert_eq!(v.len(), 100);
        assert!(v.contains(&0.0));
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        let mirrored: Vec<f64> = sorted.iter().rev().map(|x| -x + 0.0).collect();
        assert_eq!(sorted, mirrored);
        assert!(v.iter().all(|x| (x / 0.5).fract() == 0.0));
        let mean_abs = |eps: f64| {
            let q = quantize_laplace(&PrivacyParams { epsilon: eps, ..p }).unwrap();
            q.iter().map(|x| x.abs()).sum::<f64>() / q.len() as f64
        };
        assert!(mean_abs(2.0) < mean_abs(1.0));
        assert_eq!(quantize_laplace(&PrivacyParams { list_len: 1, ..p }).unwrap(), vec![0.0]);
        assert_eq!(
            quantize_laplace_fixed(&p, DEFAULT_SCALE).unwrap()[0],
            (v[0] * 100.0) as i64
        );
        assert!(quantize_laplace(&PrivacyParams { epsilon: 0.0, ..p }).is_err());
        assert!(quantize_laplace(&PrivacyParams { list_len: 0, ..p }).is_err());
    }

    #[test]
    fn cdp_chain_preserves_multiset() {
        let mut rng = rng();
        let kp = KeyPair::<G>::generate(&mut rng);
        let table = DlogTable::<G>::new(1 << 16);
        let p = PrivacyParams {
            epsilon: 1.0,
            delta_f: 1.0,
            theta: 0.5,
            list_len: 20,
        };
        let tree = CnTree::balanced(&ids(3)).unwrap();
        let (noise, proofs) = cdp_generate(&p, 100, &tree, kp.public(), 16, &mut rng).unwrap();
        assert_eq!(proofs.len(), 3);
        let mut got: Vec<i64> = noise
            .encrypted
            .iter()
            .map(|c| decrypt(c, kp.secret(), &table).unwrap())
            .collect();
        let mut want = noise.values.clone();
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want);
        let chain: Vec<_> = proofs.iter().map(|(_, p)| p.clone()).collect();
        assert!(verify_cdp_chain(&noise.values, &chain, kp.public(), &noise.encrypted));
        assert!(!verify_cdp_chain(&noise.values, &chain[1..], kp.public(), &noise.encrypted));

        let single = PrivacyParams { list_len: 1, ..p };
        let (one, _) = cdp_generate(&single, 100, &tree, kp.public(), 4, &mut rng).unwrap();
        assert_eq!(decrypt(&one.encrypted[0], kp.secret(), &table).unwrap(), 0);
    }

    #[test]
    fn cdp_apply_consumes_leading_noise() {
        let mut rng = rng();
        let kp = KeyPair::<G>::generate(&mut rng);
        let table = DlogTable::<G>::new(1 << 16);
        let p = PrivacyParams {
            epsilon: 1.0,
            delta_f: 1.0,
            theta: 1.0,
            list_len: 4,
        };
        let noise = NoiseList::<G> {
            params: p,
            scale: 1,
            values: vec![-2, 0, 5, 9],
            encrypted: cdp_initial(&[-2, 0, 5, 9]),
        };
        let op = OperationSpec::new(OperationKind::Cosim).with_scale(1);
        let r = encode::<G, _>(&op, &[vec![1.0, 3.0]], kp.public(), &mut rng).unwrap();
        let out = cdp_apply(&r, &noise).unwrap();
        let v: Vec<i64> = out.v.iter().map(|c| decrypt(c, kp.secret(), &table).unwrap()).collect();
        assert_eq!(v, vec![3 - 2, 1, 9 + 5]);
        assert_eq!(decrypt(&out.c, kp.secret(), &table).unwrap(), 1);
        let short = NoiseList { encrypted: cdp_initial(&[1]), ..noise };
        assert_eq!(
            cdp_apply(&r, &short).unwrap_err(),
            ProtocolError::NoiseExhausted { needed: 3, have: 1 }
        );
    }
}
