//! Range proofs for ElGamal-committed values from digit signatures held by
//! all computing nodes.
//!
//! Each computing node `i` holds a secret `x_i` and publishes
//! `Z_i = x_i B_2` in the second pairing group together with the signatures
//! `A_{i,b} = (x_i + b)^{-1} B_1` for every digit `b` in `[0, u)`. A prover
//! writes `m = sum_j m_j u^j` and blinds the signature of each digit under
//! every node's key, so soundness holds as long as one node's `x_i` is
//! unknown to the prover. The value is bound to `C2 = mB + r Omega`.
//!
//! Verification equations, with `e` the pairing and `g = e(B_1, B_2)`:
//!
//! ```text
//! D       = c C2 + z_r Omega + sum_j u^j z_{m_j} B
//! a_{i,j} = e(V_{i,j}, c Z_i - z_{m_j} B_2) + z_{v_j} g
//! ```
//!
//! The challenge `c` hashes the statement together with `D`, every `V_{i,j}`
//! and every `a_{i,j}`.

use rand::{CryptoRng, RngCore};

use super::transcript::Transcript;
use super::{tag, ZkpError};
use crate::group::Group;
use crate::wire::{Decode, Encode, Reader, WireError, Writer};

pub const LABEL_RANGE: &[u8] = b"veriquery/range";

/// Digit base used unless a query overrides it.
pub const DEFAULT_BASE: u64 = 16;

/// Published digit signatures of one computing node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnRangeKey<G: Group> {
    pub z: G::G2,
    pub a: Vec<G::Point>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeSignatures<G: Group> {
    pub u: u64,
    pub cns: Vec<CnRangeKey<G>>,
}

fn check_base(u: u64) -> Result<(), ZkpError> {
    if u < 2 {
        return Err(ZkpError::InvalidRangeParams("digit base must be at least 2"));
    }
    if u > 1 << 16 {
        return Err(ZkpError::InvalidRangeParams("digit base above 2^16"));
    }
    Ok(())
}

/// One computing node's secret `x_i` and its published signatures.
pub fn range_keygen<G: Group, R: RngCore + CryptoRng + ?Sized>(
    u: u64,
    rng: &mut R,
) -> Result<(G::Scalar, CnRangeKey<G>), ZkpError> {
    check_base(u)?;
    let b2 = G::g2_generator()?;
    'draw: loop {
        let x = G::scalar_random(rng);
        let mut a = Vec::with_capacity(u as usize);
        for b in 0..u {
            match G::scalar_invert(&(x + G::scalar_from_u64(b))) {
                Some(inv) => a.push(G::mul_base(&inv)),
                None => continue 'draw,
            }
        }
        return Ok((x, CnRangeKey { z: G::g2_mul(&b2, &x), a }));
    }
}

pub fn range_setup<G: Group, R: RngCore + CryptoRng + ?Sized>(
    u: u64,
    n_cns: usize,
    rng: &mut R,
) -> Result<(Vec<G::Scalar>, RangeSignatures<G>), ZkpError> {
    check_base(u)?;
    let mut secrets = Vec::with_capacity(n_cns);
    let mut cns = Vec::with_capacity(n_cns);
    for _ in 0..n_cns {
        let (x, k) = range_keygen::<G, R>(u, rng)?;
        secrets.push(x);
        cns.push(k);
    }
    Ok((secrets, RangeSignatures { u, cns }))
}

impl<G: Group> RangeSignatures<G> {
    /// Checks `e(A_{i,b}, Z_i + b B_2) = e(B_1, B_2)` for every node and digit.
    pub fn well_formed(&self) -> Result<bool, ZkpError> {
        let b2 = G::g2_generator()?;
        let g = G::pairing(&G::generator(), &b2)?;
        for cn in &self.cns {
            if cn.a.len() as u64 != self.u {
                return Ok(false);
            }
            for (b, a) in cn.a.iter().enumerate() {
                let q = G::g2_add(&cn.z, &G::g2_mul(&b2, &G::scalar_from_u64(b as u64)));
                if G::pairing(a, &q)? != g {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

impl<G: Group> Encode for RangeSignatures<G> {
    fn encode(&self, w: &mut Writer) {
        w.u64(self.u).len(self.cns.len());
        for cn in &self.cns {
            w.g2::<G>(&cn.z);
            for a in &cn.a {
                w.point::<G>(a);
            }
        }
    }
}

impl<G: Group> Decode for RangeSignatures<G> {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let u = r.u64()?;
        if !(2..=1 << 16).contains(&u) {
            return Err(WireError::TooLong(u as usize));
        }
        let n = r.count(G::G2_LEN + u as usize * G::POINT_LEN)?;
        let mut cns = Vec::with_capacity(n);
        for _ in 0..n {
            let z = r.g2::<G>()?;
            let a = (0..u).map(|_| r.point::<G>()).collect::<Result<_, _>>()?;
            cns.push(CnRangeKey { z, a });
        }
        Ok(RangeSignatures { u, cns })
    }
}

/// Proof that `C2 = mB + r Omega` commits to `m` in `[0, u^l)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeProof<G: Group> {
    pub u: u64,
    pub l: u32,
    pub c2: G::Point,
    pub c: G::Scalar,
    pub z_r: G::Scalar,
    pub z_v: Vec<G::Scalar>,
    pub z_m: Vec<G::Scalar>,
    pub d: G::Point,
    /// `a[i][j]` for node `i`, digit `j`.
    pub a: Vec<Vec<G::Target>>,
    /// `v[i][j]` for node `i`, digit `j`.
    pub v: Vec<Vec<G::Point>>,
}

/// `u^l`, or `None` on overflow of `i64`.
pub fn range_bound(u: u64, l: u32) -> Option<u64> {
    u.checked_pow(l).filter(|&b| b <= i64::MAX as u64)
}

fn digits(mut m: u64, u: u64, l: u32) -> Vec<u64> {
    (0..l)
        .map(|_| {
            let d = m % u;
            m /= u;
            d
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn challenge<G: Group>(
    u: u64,
    l: u32,
    omega: &G::Point,
    sigs: &RangeSignatures<G>,
    c2: &G::Point,
    d: &G::Point,
    v: &[Vec<G::Point>],
    a: &[Vec<G::Target>],
) -> G::Scalar {
    let mut t = Transcript::new(LABEL_RANGE);
    t.append_u64(b"u", u);
    t.append_u64(b"l", l as u64);
    t.append_point::<G>(b"B", &G::generator());
    t.append_point::<G>(b"Omega", omega);
    t.append_point::<G>(b"C2", c2);
    t.append_u64(b"cns", sigs.cns.len() as u64);
    for cn in &sigs.cns {
        t.append_g2::<G>(b"Z", &cn.z);
    }
    t.append_point::<G>(b"D", d);
    for (vi, ai) in v.iter().zip(a) {
        t.append_points::<G>(b"V", vi);
        for aij in ai {
            t.append_target::<G>(b"a", aij);
        }
    }
    t.challenge_scalar::<G>(b"c")
}

/// Proves `0 <= m < u^l` for `C2 = mB + r Omega`.
pub fn prove_range<G: Group, R: RngCore + CryptoRng + ?Sized>(
    m: i64,
    r: &G::Scalar,
    omega: &G::Point,
    sigs: &RangeSignatures<G>,
    l: u32,
    rng: &mut R,
) -> Result<RangeProof<G>, ZkpError> {
    check_base(sigs.u)?;
    let bound = range_bound(sigs.u, l)
        .filter(|_| l >= 1)
        .ok_or(ZkpError::InvalidRangeParams("u^l must be in [u, 2^63)"))?;
    if m < 0 || m as u64 >= bound {
        return Err(ZkpError::OutOfRange {
            m: m as i128,
            lo: 0,
            hi: bound as i128,
        });
    }
    let c2 = G::mul_base(&G::scalar_from_i64(m)) + *omega * *r;
    build(m as u64, &c2, r, omega, sigs, l, rng)
}

/// Builds a transcript from the base-`u` digits of `m mod u^l` without
/// checking that `m` is in range. Such a proof does not verify against a
/// commitment to an out-of-range value; used only to inject faulty provers.
#[doc(hidden)]
pub fn prove_range_unchecked<G: Group, R: RngCore + CryptoRng + ?Sized>(
    m: i64,
    r: &G::Scalar,
    omega: &G::Point,
    sigs: &RangeSignatures<G>,
    l: u32,
    rng: &mut R,
) -> Result<RangeProof<G>, ZkpError> {
    check_base(sigs.u)?;
    let bound = range_bound(sigs.u, l).ok_or(ZkpError::InvalidRangeParams("u^l overflows"))?;
    let c2 = G::mul_base(&G::scalar_from_i64(m)) + *omega * *r;
    build(m.rem_euclid(bound as i64) as u64, &c2, r, omega, sigs, l, rng)
}

fn build<G: Group, R: RngCore + CryptoRng + ?Sized>(
    m: u64,
    c2: &G::Point,
    r: &G::Scalar,
    omega: &G::Point,
    sigs: &RangeSignatures<G>,
    l: u32,
    rng: &mut R,
) -> Result<RangeProof<G>, ZkpError> {
    let u = sigs.u;
    let b2 = G::g2_generator()?;
    let m_j = digits(m, u, l);
    let s: Vec<G::Scalar> = (0..l).map(|_| G::scalar_random(rng)).collect();
    let t: Vec<G::Scalar> = (0..l).map(|_| G::scalar_random(rng)).collect();
    let v_j: Vec<G::Scalar> = (0..l).map(|_| G::scalar_random(rng)).collect();
    let n = G::scalar_random(rng);

    let mut v = Vec::with_capacity(sigs.cns.len());
    let mut a = Vec::with_capacity(sigs.cns.len());
    for cn in &sigs.cns {
        if cn.a.len() as u64 != u {
            return Err(ZkpError::InvalidRangeParams("signature count differs from base"));
        }
        let mut vi = Vec::with_capacity(l as usize);
        let mut ai = Vec::with_capacity(l as usize);
        for j in 0..l as usize {
            let vij = cn.a[m_j[j] as usize] * v_j[j];
            // -s e(V, B2) + t e(B1, B2) = e(t B1 - s V, B2)
            ai.push(G::pairing(&(G::mul_base(&t[j]) - vij * s[j]), &b2)?);
            vi.push(vij);
        }
        v.push(vi);
        a.push(ai);
    }

    let mut d = *omega * n;
    let mut uj = G::scalar_one();
    let u_s = G::scalar_from_u64(u);
    for sj in &s {
        d += G::mul_base(&(uj * *sj));
        uj = uj * u_s;
    }

    let c = challenge(u, l, omega, sigs, c2, &d, &v, &a);
    let z_v = t.iter().zip(&v_j).map(|(t, v)| *t - *v * c).collect();
    let z_m = s
        .iter()
        .zip(&m_j)
        .map(|(s, m)| *s - G::scalar_from_u64(*m) * c)
        .collect();
    Ok(RangeProof {
        u,
        l,
        c2: *c2,
        c,
        z_r: n - *r * c,
        z_v,
        z_m,
        d,
        a,
        v,
    })
}

/// Verifies the proof against the published signatures of every node.
pub fn verify_range<G: Group>(proof: &RangeProof<G>, sigs: &RangeSignatures<G>, omega: &G::Point) -> bool {
    verify_inner(proof, sigs, omega).unwrap_or(false)
}

fn verify_inner<G: Group>(
    p: &RangeProof<G>,
    sigs: &RangeSignatures<G>,
    omega: &G::Point,
) -> Result<bool, ZkpError> {
    let l = p.l as usize;
    if p.u != sigs.u
        || l == 0
        || range_bound(p.u, p.l).is_none()
        || p.z_v.len() != l
        || p.z_m.len() != l
        || p.a.len() != sigs.cns.len()
        || p.v.len() != sigs.cns.len()
        || p.a.iter().any(|ai| ai.len() != l)
        || p.v.iter().any(|vi| vi.len() != l)
    {
        return Ok(false);
    }
    if challenge(p.u, p.l, omega, sigs, &p.c2, &p.d, &p.v, &p.a) != p.c {
        return Ok(false);
    }

    let mut rhs = p.c2 * p.c + *omega * p.z_r;
    let mut uj = G::scalar_one();
    let u_s = G::scalar_from_u64(p.u);
    for zm in &p.z_m {
        rhs += G::mul_base(&(uj * *zm));
        uj = uj * u_s;
    }
    if rhs != p.d {
        return Ok(false);
    }

    let b1 = G::generator();
    let b2 = G::g2_generator()?;
    for (i, cn) in sigs.cns.iter().enumerate() {
        let cz = G::g2_mul(&cn.z, &p.c);
        for j in 0..l {
            let q = G::g2_add(&cz, &G::g2_mul(&b2, &(-p.z_m[j])));
            let expect = G::multi_pairing(&[(p.v[i][j], q), (b1 * p.z_v[j], b2)])?;
            if expect != p.a[i][j] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

impl<G: Group> Encode for RangeProof<G> {
    fn encode(&self, w: &mut Writer) {
        w.u8(tag::RANGE).u64(self.u).u32(self.l).len(self.a.len());
        w.point::<G>(&self.c2).scalar::<G>(&self.c).scalar::<G>(&self.z_r);
        for z in self.z_v.iter().chain(&self.z_m) {
            w.scalar::<G>(z);
        }
        w.point::<G>(&self.d);
        for ai in &self.a {
            for t in ai {
                w.target::<G>(t);
            }
        }
        for vi in &self.v {
            for p in vi {
                w.point::<G>(p);
            }
        }
    }
}

impl<G: Group> Decode for RangeProof<G> {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let t = r.u8()?;
        if t != tag::RANGE {
            return Err(WireError::UnknownTag { what: "range proof", tag: t });
        }
        let u = r.u64()?;
        let l = r.u32()? as usize;
        let per_cn = l.saturating_mul(G::TARGET_LEN + G::POINT_LEN);
        let n = r.count(per_cn)?;
        if l == 0 || l > 64 {
            return Err(WireError::TooLong(l));
        }
        let c2 = r.point::<G>()?;
        let c = r.scalar::<G>()?;
        let z_r = r.scalar::<G>()?;
        let z_v = (0..l).map(|_| r.scalar::<G>()).collect::<Result<_, _>>()?;
        let z_m = (0..l).map(|_| r.scalar::<G>()).collect::<Result<_, _>>()?;
        let d = r.point::<G>()?;
        let mut a = Vec::with_capacity(n);
        for _ in 0..n {
            a.push((0..l).map(|_| r.target::<G>()).collect::<Result<_, _>>()?);
        }
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push((0..l).map(|_| r.point::<G>()).collect::<Result<_, _>>()?);
        }
        Ok(RangeProof {
            u,
            l: l as u32,
            c2,
            c,
            z_r,
            z_v,
            z_m,
            d,
            a,
            v,
        })
    }
}

/// Parameters for proving `m` in `[lo, hi)`: `m - lo` is proven below `u^l`,
/// with `l` minimal such that `u^l >= hi - lo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RangeParams {
    pub lo: i64,
    pub hi: i64,
    pub u: u64,
    pub l: u32,
}

impl RangeParams {
    pub fn bound(&self) -> u64 {
        range_bound(self.u, self.l).expect("validated at construction")
    }

    /// True when the upper end needs its own proof.
    pub fn needs_upper(&self) -> bool {
        self.bound() as i128 > self.hi as i128 - self.lo as i128
    }
}

pub fn range_params(lo: i64, hi: i64, u: u64) -> Result<RangeParams, ZkpError> {
    check_base(u)?;
    if hi <= lo {
        return Err(ZkpError::InvalidRangeParams("empty range"));
    }
    let width = (hi as i128 - lo as i128) as u128;
    let mut l = 1u32;
    let mut pow = u as u128;
    while pow < width {
        l += 1;
        pow *= u as u128;
    }
    range_bound(u, l).ok_or(ZkpError::InvalidRangeParams("range too wide"))?;
    Ok(RangeParams { lo, hi, u, l })
}

/// `m - lo` and the digit parameters for `[lo, hi)`.
pub fn shift_range(m: i64, lo: i64, hi: i64, u: u64) -> Result<(i64, RangeParams), ZkpError> {
    let params = range_params(lo, hi, u)?;
    if m < lo || m >= hi {
        return Err(ZkpError::OutOfRange {
            m: m as i128,
            lo: lo as i128,
            hi: hi as i128,
        });
    }
    Ok((m - lo, params))
}

/// Proof that a ciphertext's `C2` commits to a value in `[lo, hi)`: one
/// proof for `m - lo` and, unless `hi - lo = u^l`, one for
/// `m - hi + u^l`, both below `u^l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundedRangeProof<G: Group> {
    pub lower: RangeProof<G>,
    pub upper: Option<RangeProof<G>>,
}

fn shift_c2<G: Group>(c2: &G::Point, by: i64) -> G::Point {
    *c2 + G::mul_base(&G::scalar_from_i64(by))
}

pub fn prove_bounded<G: Group, R: RngCore + CryptoRng + ?Sized>(
    m: i64,
    r: &G::Scalar,
    omega: &G::Point,
    sigs: &RangeSignatures<G>,
    params: &RangeParams,
    rng: &mut R,
) -> Result<BoundedRangeProof<G>, ZkpError> {
    if sigs.u != params.u {
        return Err(ZkpError::InvalidRangeParams("signature base differs from range base"));
    }
    let (shifted, _) = shift_range(m, params.lo, params.hi, params.u)?;
    let lower = prove_range(shifted, r, omega, sigs, params.l, rng)?;
    let upper = if params.needs_upper() {
        let top = m - params.hi + params.bound() as i64;
        Some(prove_range(top, r, omega, sigs, params.l, rng)?)
    } else {
        None
    };
    Ok(BoundedRangeProof { lower, upper })
}

/// Faulty-prover counterpart of [`prove_bounded`] that skips the range check.
#[doc(hidden)]
pub fn prove_bounded_unchecked<G: Group, R: RngCore + CryptoRng + ?Sized>(
    m: i64,
    r: &G::Scalar,
    omega: &G::Point,
    sigs: &RangeSignatures<G>,
    params: &RangeParams,
    rng: &mut R,
) -> Result<BoundedRangeProof<G>, ZkpError> {
    let lower = prove_range_unchecked(m - params.lo, r, omega, sigs, params.l, rng)?;
    let upper = if params.needs_upper() {
        let top = m - params.hi + params.bound() as i64;
        Some(prove_range_unchecked(top, r, omega, sigs, params.l, rng)?)
    } else {
        None
    };
    Ok(BoundedRangeProof { lower, upper })
}

/// Verifies that `c2` (the right half of a ciphertext under `omega`) commits
/// to a value in `[lo, hi)`.
pub fn verify_bounded<G: Group>(
    proof: &BoundedRangeProof<G>,
    c2: &G::Point,
    omega: &G::Point,
    sigs: &RangeSignatures<G>,
    params: &RangeParams,
) -> bool {
    if sigs.u != params.u || proof.lower.u != params.u || proof.lower.l != params.l {
        return false;
    }
    if proof.lower.c2 != shift_c2::<G>(c2, -params.lo) || !verify_range(&proof.lower, sigs, omega) {
        return false;
    }
    match (&proof.upper, params.needs_upper()) {
        (None, false) => true,
        (Some(up), true) => {
            let shift = params.bound() as i128 - params.hi as i128;
            let Ok(shift) = i64::try_from(shift) else {
                return false;
            };
            up.l == params.l && up.c2 == shift_c2::<G>(c2, shift) && verify_range(up, sigs, omega)
        }
        _ => false,
    }
}

impl<G: Group> Encode for BoundedRangeProof<G> {
    fn encode(&self, w: &mut Writer) {
        w.u8(tag::BOUNDED_RANGE);
        self.lower.encode(w);
        match &self.upper {
            Some(p) => {
                w.u8(1);
                p.encode(w);
            }
            None => {
                w.u8(0);
            }
        }
    }
}

impl<G: Group> Decode for BoundedRangeProof<G> {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let t = r.u8()?;
        if t != tag::BOUNDED_RANGE {
            return Err(WireError::UnknownTag { what: "bounded range proof", tag: t });
        }
        let lower = RangeProof::decode(r)?;
        let upper = match r.u8()? {
            0 => None,
            1 => Some(RangeProof::decode(r)?),
            t => return Err(WireError::UnknownTag { what: "upper range proof flag", tag: t }),
        };
        Ok(BoundedRangeProof { lower, upper })
    }
}
