//! Encodable operations: each data provider maps its records to a vector
//! `V` and a count `c`, the vectors are summed under encryption, and the
//! querier turns the decrypted sums into the statistic.
//!
//! All real values are fixed-point encoded with the operation's scale `s`.
//! Products of `t` encoded values carry scale `s^t`.

use rand::{CryptoRng, Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::elgamal::{encrypt_with_nonce, Ciphertext, ElGamalError, DEFAULT_SCALE};
use crate::group::Group;
use crate::wire::{Decode, Encode, Reader, WireError, Writer};

pub mod extreme;
pub mod regression;

pub use self::extreme::{
    bitwise_error_prob, bitwise_error_prob_exact, iterative_extreme, iterative_workload,
    malicious_influence, ExtremeOutcome, ExtremeStep,
};
pub use self::regression::{
    solve_linear_system, solve_linreg, train_logreg, ApproxMethod, LogRegParams, LogisticAggregate,
    RegressionModel,
};

/// Largest domain width for range-vector operations.
pub const MAX_DOMAIN: i64 = 1 << 12;

/// Bound on a single fixed-point encoded value.
const MAX_ENCODED: u64 = 1 << 40;

/// Random-integer mode draws from `[1, 2^32)`, so sums over any realistic
/// number of data providers stay far below the group order.
const RANDOM_BOUND: i64 = 1 << 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EncodingError {
    #[error("record has {got} attributes, expected {expected}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("value {value} outside [{lo}, {hi})")]
    ValueOutOfBounds { value: f64, lo: i64, hi: i64 },
    #[error("label {0} is not 0 or 1")]
    LabelNotBinary(f64),
    #[error("aggregate count is zero")]
    ZeroCount,
    #[error("vector has {got} entries, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot decode: {0}")]
    DecodeFailure(String),
    #[error("linear system is singular")]
    SingularSystem,
    #[error("training diverged: loss {0}")]
    Divergence(f64),
    #[error("invalid arguments: {0}")]
    InvalidArgs(String),
    #[error("malformed operation: {0}")]
    MalformedQuery(String),
    #[error(transparent)]
    ElGamal(#[from] ElGamalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationKind {
    Sum,
    Mean,
    Variance,
    StdDev,
    And,
    Or,
    Min,
    Max,
    FreqCount,
    SetIntersection,
    SetUnion,
    Cosim,
    R2,
    LinReg,
    LogReg,
}

impl OperationKind {
    pub const ALL: [OperationKind; 15] = [
        OperationKind::Sum,
        OperationKind::Mean,
        OperationKind::Variance,
        OperationKind::StdDev,
        OperationKind::And,
        OperationKind::Or,
        OperationKind::Min,
        OperationKind::Max,
        OperationKind::FreqCount,
        OperationKind::SetIntersection,
        OperationKind::SetUnion,
        OperationKind::Cosim,
        OperationKind::R2,
        OperationKind::LinReg,
        OperationKind::LogReg,
    ];

    pub fn name(self) -> &'static str {
        use OperationKind::*;
        match self {
            Sum => "sum",
            Mean => "mean",
            Variance => "variance",
            StdDev => "stddev",
            And => "and",
            Or => "or",
            Min => "min",
            Max => "max",
            FreqCount => "frequency",
            SetIntersection => "intersection",
            SetUnion => "union",
            Cosim => "cosim",
            R2 => "r2",
            LinReg => "lin_reg",
            LogReg => "log_reg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        use OperationKind::*;
        Some(match s.to_ascii_lowercase().as_str() {
            "sum" => Sum,
            "mean" | "average" | "avg" => Mean,
            "variance" | "var" => Variance,
            "stddev" | "std" => StdDev,
            "and" => And,
            "or" => Or,
            "min" => Min,
            "max" => Max,
            "frequency" | "freq" | "freq_count" => FreqCount,
            "intersection" | "set_intersection" => SetIntersection,
            "union" | "set_union" => SetUnion,
            "cosim" => Cosim,
            "r2" => R2,
            "lin_reg" | "linreg" => LinReg,
            "log_reg" | "logreg" => LogReg,
            _ => return None,
        })
    }

    /// Operations whose result only depends on which sums are zero.
    pub fn is_bitwise(self) -> bool {
        use OperationKind::*;
        matches!(self, And | Or | Min | Max | SetIntersection | SetUnion)
    }

    /// Operations whose vector positions enumerate the integer domain
    /// `[lo, hi)` given by the bounds.
    pub fn uses_domain(self) -> bool {
        use OperationKind::*;
        matches!(self, Min | Max | FreqCount | SetIntersection | SetUnion)
    }

    /// Operations where bounds restrict every encoded entry and are enforced
    /// with range proofs.
    pub fn bounds_entries(self) -> bool {
        !self.is_bitwise() && !self.uses_domain()
    }

    /// Ratio-valued results, compared with a `1/scale` tolerance.
    pub fn is_ratio(self) -> bool {
        use OperationKind::*;
        matches!(self, Mean | Variance | StdDev | Cosim | R2 | LinReg | LogReg)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitwiseMode {
    /// `E(R)` with random positive `R` for true, `E(0)` for false.
    #[default]
    RandomInteger,
    /// `E(1)` or `E(0)`, blinded by collective obfuscation before decryption.
    BitWithObfuscation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationSpec {
    pub kind: OperationKind,
    /// `[lo, hi)`: the domain for range-vector operations, otherwise a bound
    /// on every encoded entry in raw fixed-point units.
    pub bounds: Option<(i64, i64)>,
    pub bitwise_mode: BitwiseMode,
    /// Feature count `D` for regression and R².
    pub features: usize,
    /// Model `c_0..c_D` the data providers evaluate for R².
    pub model: Option<Vec<f64>>,
    pub scale: i64,
    pub logreg: LogRegParams,
}

impl OperationSpec {
    pub fn new(kind: OperationKind) -> Self {
        OperationSpec {
            kind,
            bounds: None,
            bitwise_mode: BitwiseMode::default(),
            features: 1,
            model: None,
            scale: DEFAULT_SCALE,
            logreg: LogRegParams::default(),
        }
    }

    pub fn with_bounds(mut self, lo: i64, hi: i64) -> Self {
        self.bounds = Some((lo, hi));
        self
    }

    pub fn with_features(mut self, d: usize) -> Self {
        self.features = d;
        self
    }

    pub fn with_scale(mut self, s: i64) -> Self {
        self.scale = s;
        self
    }

    pub fn with_mode(mut self, m: BitwiseMode) -> Self {
        self.bitwise_mode = m;
        self
    }

    pub fn with_model(mut self, m: Vec<f64>) -> Self {
        self.model = Some(m);
        self
    }

    /// Number of attributes per record.
    pub fn arity(&self) -> usize {
        use OperationKind::*;
        match self.kind {
            Cosim => 2,
            R2 | LinReg | LogReg => self.features + 1,
            _ => 1,
        }
    }

    /// Length `d` of the vector `V`.
    pub fn dimension(&self) -> usize {
        use OperationKind::*;
        let d = self.features;
        match self.kind {
            Sum | Mean | And | Or => 1,
            Variance | StdDev => 2,
            Cosim | R2 => 3,
            Min | Max | FreqCount | SetIntersection | SetUnion => {
                self.bounds.map_or(0, |(lo, hi)| (hi - lo).max(0) as usize)
            }
            LinReg => 2 * d + d * (d + 1) / 2 + 1,
            LogReg => (1..=self.logreg.degree).map(|t| (d + 1).pow(t as u32)).sum(),
        }
    }

    /// Whether the querier tests sums against zero instead of decoding them.
    pub fn zero_test_only(&self) -> bool {
        self.kind.is_bitwise()
    }

    pub fn needs_obfuscation(&self) -> bool {
        self.kind.is_bitwise() && self.bitwise_mode == BitwiseMode::BitWithObfuscation
    }

    /// Bounds enforced by range proofs on every entry of `V`, if any.
    pub fn entry_bounds(&self) -> Option<(i64, i64)> {
        self.bounds.filter(|_| self.kind.bounds_entries())
    }

    pub fn validate(&self) -> Result<(), EncodingError> {
        let bad = |m: &str| Err(EncodingError::MalformedQuery(m.to_string()));
        if self.scale <= 0 {
            return bad("scale must be positive");
        }
        if let Some((lo, hi)) = self.bounds {
            if hi <= lo {
                return bad("range must satisfy lo < hi");
            }
            if self.kind.uses_domain() && hi - lo > MAX_DOMAIN {
                return bad("domain wider than 4096 values");
            }
        } else if self.kind.uses_domain() {
            return Err(EncodingError::MalformedQuery(format!(
                "{} needs a RANGE domain",
                self.kind.name()
            )));
        }
        match self.kind {
            OperationKind::R2 | OperationKind::LinReg | OperationKind::LogReg if self.features == 0 => {
                bad("regression needs at least one feature")
            }
            OperationKind::R2 if self.model.as_ref().map(Vec::len) != Some(self.features + 1) => {
                bad("r2 needs a MODEL with one coefficient per feature plus intercept")
            }
            OperationKind::LogReg if !(1..=regression::MAX_DEGREE).contains(&self.logreg.degree) => {
                bad("logistic approximation degree must be in 1..=6")
            }
            _ => Ok(()),
        }
    }
}

/// Plaintext encoding `(V, c)` of one data provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainResponse {
    pub v: Vec<i64>,
    pub c: i64,
}

/// Encrypted `(V, c)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedResponse<G: Group> {
    pub v: Vec<Ciphertext<G>>,
    pub c: Ciphertext<G>,
}

impl<G: Group> EncodedResponse<G> {
    pub fn zero(d: usize) -> Self {
        EncodedResponse {
            v: vec![Ciphertext::zero(); d],
            c: Ciphertext::zero(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.v.len()
    }

    /// Componentwise homomorphic sum.
    pub fn add(&self, other: &Self) -> Result<Self, EncodingError> {
        if self.v.len() != other.v.len() {
            return Err(EncodingError::DimensionMismatch {
                expected: self.v.len(),
                got: other.v.len(),
            });
        }
        Ok(EncodedResponse {
            v: self.v.iter().zip(&other.v).map(|(a, b)| *a + *b).collect(),
            c: self.c + other.c,
        })
    }

    /// `V` followed by `c`.
    pub fn flat(&self) -> Vec<Ciphertext<G>> {
        let mut out = self.v.clone();
        out.push(self.c);
        out
    }

    pub fn from_flat(mut cts: Vec<Ciphertext<G>>) -> Option<Self> {
        let c = cts.pop()?;
        Some(EncodedResponse { v: cts, c })
    }
}

impl<G: Group> Encode for EncodedResponse<G> {
    fn encode(&self, w: &mut Writer) {
        crate::elgamal::encode_ciphertexts(w, &self.flat());
    }
}

impl<G: Group> Decode for EncodedResponse<G> {
    fn decode(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let cts = crate::elgamal::decode_ciphertexts::<G>(r)?;
        EncodedResponse::from_flat(cts).ok_or(WireError::Truncated { needed: 1, left: 0 })
    }
}

fn fixed(x: f64, scale: i64) -> Result<i64, EncodingError> {
    Ok(crate::elgamal::fixed_encode(x, scale, MAX_ENCODED)?.raw)
}

fn check_records(op: &OperationSpec, records: &[Vec<f64>]) -> Result<(), EncodingError> {
    let expected = op.arity();
    for r in records {
        if r.len() != expected {
            return Err(EncodingError::ArityMismatch {
                expected,
                got: r.len(),
            });
        }
    }
    Ok(())
}

/// Value sent for a true bit.
fn truth<R: RngCore + ?Sized>(mode: BitwiseMode, rng: &mut R) -> i64 {
    match mode {
        BitwiseMode::RandomInteger => rng.gen_range(1..RANDOM_BOUND),
        BitwiseMode::BitWithObfuscation => 1,
    }
}

fn domain_value(x: f64, lo: i64, hi: i64) -> Result<usize, EncodingError> {
    let v = x.round();
    if !(v >= lo as f64 && v < hi as f64) {
        return Err(EncodingError::ValueOutOfBounds { value: x, lo, hi });
    }
    Ok((v as i64 - lo) as usize)
}

/// All-zero response with `c = 0`. Added to any aggregate it leaves the
/// decoded result unchanged: AND and intersection encode the negation of
/// their input, so the neutral input 1 also maps to zero there.
pub fn neutral_plain(op: &OperationSpec) -> PlainResponse {
    PlainResponse {
        v: vec![0; op.dimension()],
        c: 0,
    }
}

/// Computes the plaintext encoding of `records` (already filtered).
pub fn encode_plain<R: RngCore + ?Sized>(
    op: &OperationSpec,
    records: &[Vec<f64>],
    rng: &mut R,
) -> Result<PlainResponse, EncodingError> {
    use OperationKind::*;
    op.validate()?;
    check_records(op, records)?;
    if records.is_empty() {
        return Ok(neutral_plain(op));
    }
    let s = op.scale;
    let n = records.len() as i64;
    let mode = op.bitwise_mode;
    let col = |j: usize| records.iter().map(move |r| r[j]);
    let v = match op.kind {
        Sum | Mean => vec![col(0).map(|x| fixed(x, s)).sum::<Result<i64, _>>()?],
        Variance | StdDev => {
            let (mut s1, mut s2) = (0i64, 0i64);
            for x in col(0) {
                let h = fixed(x, s)?;
                s1 += h;
                s2 += h * h;
            }
            vec![s1, s2]
        }
        And | Or => {
            let hit = |x: f64| match op.bounds {
                Some((lo, hi)) => x >= lo as f64 && x < hi as f64,
                None => x != 0.0,
            };
            let local = if op.kind == Or {
                col(0).any(hit)
            } else {
                col(0).all(hit)
            };
            // AND sends the negation so that a single false makes the sum nonzero
            let bit = if op.kind == Or { local } else { !local };
            vec![if bit { truth(mode, rng) } else { 0 }]
        }
        Min | Max => {
            let (lo, hi) = op.bounds.expect("validated");
            let rounded = col(0).map(f64::round);
            // only the local extreme matters, and one beyond the far end of
            // the domain cannot be the global extreme
            let (ext, beyond) = if op.kind == Min {
                let m = rounded.fold(f64::INFINITY, f64::min);
                (m, m >= hi as f64)
            } else {
                let m = rounded.fold(f64::NEG_INFINITY, f64::max);
                (m, m < lo as f64)
            };
            let mut v = vec![0i64; (hi - lo) as usize];
            if !beyond {
                let m = domain_value(ext, lo, hi)?;
                let slots: Box<dyn Iterator<Item = &mut i64>> = if op.kind == Min {
                    Box::new(v.iter_mut().skip(m + 1))
                } else {
                    Box::new(v.iter_mut().take(m))
                };
                for slot in slots {
                    *slot = truth(mode, rng);
                }
            }
            v
        }
        FreqCount | SetIntersection | SetUnion => {
            let (lo, hi) = op.bounds.expect("validated");
            let d = (hi - lo) as usize;
            let idx: Vec<usize> = col(0).map(|x| domain_value(x, lo, hi)).collect::<Result<_, _>>()?;
            let mut v = vec![0i64; d];
            match op.kind {
                FreqCount => {
                    for i in idx {
                        v[i] += 1;
                    }
                }
                SetUnion | SetIntersection => {
                    let mut member = vec![false; d];
                    for i in idx {
                        member[i] = true;
                    }
                    let want = op.kind == SetUnion;
                    for (slot, m) in v.iter_mut().zip(member) {
                        if m == want {
                            *slot = truth(mode, rng);
                        }
                    }
                }
                _ => unreachable!(),
            }
            v
        }
        Cosim => {
            let mut v = vec![0i64; 3];
            for r in records {
                let (a, b) = (fixed(r[0], s)?, fixed(r[1], s)?);
                v[0] += a * b;
                v[1] += a * a;
                v[2] += b * b;
            }
            v
        }
        R2 => {
            let model = op.model.as_ref().expect("validated");
            let mut v = vec![0i64; 3];
            for r in records {
                let (x, y) = r.split_at(op.features);
                let y = y[0];
                let yhat = model[0] + x.iter().zip(&model[1..]).map(|(a, b)| a * b).sum::<f64>();
                let (yr, res) = (fixed(y, s)?, fixed(y - yhat, s)?);
                v[0] += yr;
                v[1] += yr * yr;
                v[2] += res * res;
            }
            v
        }
        LinReg => regression::encode_linreg(records, op.features, s)?,
        LogReg => regression::encode_logreg(records, op.features, op.logreg.degree, s)?,
    };
    Ok(PlainResponse { v, c: n })
}

/// Checks every entry against the entry bounds, if the operation has them.
pub fn check_entry_bounds(op: &OperationSpec, plain: &PlainResponse) -> Result<(), EncodingError> {
    if let Some((lo, hi)) = op.entry_bounds() {
        if let Some(&x) = plain.v.iter().find(|&&x| x < lo || x >= hi) {
            return Err(EncodingError::ValueOutOfBounds {
                value: x as f64,
                lo,
                hi,
            });
        }
    }
    Ok(())
}

/// Encrypts a plaintext response, returning the nonces of the `V` entries
/// (needed for range proofs).
pub fn encrypt_plain<G: Group, R: RngCore + CryptoRng + ?Sized>(
    plain: &PlainResponse,
    pk: &G::Point,
    rng: &mut R,
) -> (EncodedResponse<G>, Vec<G::Scalar>) {
    let mut nonces = Vec::with_capacity(plain.v.len());
    let v = plain
        .v
        .iter()
        .map(|&m| {
            let r = G::scalar_random(rng);
            nonces.push(r);
            encrypt_with_nonce(pk, &G::scalar_from_i64(m), &r)
        })
        .collect();
    let r = G::scalar_random(rng);
    let c = encrypt_with_nonce(pk, &G::scalar_from_i64(plain.c), &r);
    (EncodedResponse { v, c }, nonces)
}

/// `encode_plain` followed by encryption under `pk`.
pub fn encode<G: Group, R: RngCore + CryptoRng + ?Sized>(
    op: &OperationSpec,
    records: &[Vec<f64>],
    pk: &G::Point,
    rng: &mut R,
) -> Result<EncodedResponse<G>, EncodingError> {
    let plain = encode_plain(op, records, rng)?;
    check_entry_bounds(op, &plain)?;
    Ok(encrypt_plain(&plain, pk, rng).0)
}

pub fn neutral_response<G: Group, R: RngCore + CryptoRng + ?Sized>(
    op: &OperationSpec,
    pk: &G::Point,
    rng: &mut R,
) -> EncodedResponse<G> {
    encrypt_plain(&neutral_plain(op), pk, rng).0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedResult {
    pub kind: OperationKind,
    pub values: Vec<f64>,
    pub count: i64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Applies the querier-side decoding to the decrypted aggregate. For
/// bitwise operations `v` holds 0 for zero sums and any nonzero value
/// otherwise.
pub fn decode(op: &OperationSpec, v: &[i64], count: i64) -> Result<DecodedResult, EncodingError> {
    use OperationKind::*;
    let d = op.dimension();
    if v.len() != d {
        return Err(EncodingError::DimensionMismatch {
            expected: d,
            got: v.len(),
        });
    }
    let needs_count = !matches!(op.kind, Sum | And | Or | FreqCount | SetIntersection | SetUnion);
    if needs_count && count <= 0 {
        return Err(EncodingError::ZeroCount);
    }
    let s = op.scale as f64;
    let n = count as f64;
    let mut warnings = Vec::new();
    let values = match op.kind {
        Sum => vec![v[0] as f64 / s],
        Mean => vec![v[0] as f64 / s / n],
        Variance | StdDev => {
            let m1 = v[0] as f64 / s / n;
            let m2 = v[1] as f64 / (s * s) / n;
            let mut var = m2 - m1 * m1;
            if var < 0.0 {
                warnings.push(format!("clamped negative variance {var:e} to 0"));
                var = 0.0;
            }
            vec![if op.kind == Variance { var } else { var.sqrt() }]
        }
        And => vec![if v[0] == 0 { 1.0 } else { 0.0 }],
        Or => vec![if v[0] != 0 { 1.0 } else { 0.0 }],
        Min | Max => {
            let (lo, hi) = op.bounds.expect("validated");
            let value = if op.kind == Min {
                match v.iter().position(|&x| x != 0) {
                    Some(0) => return Err(EncodingError::DecodeFailure("min below domain".into())),
                    Some(i) => lo + i as i64 - 1,
                    None => hi - 1,
                }
            } else {
                match v.iter().rposition(|&x| x != 0) {
                    Some(i) if i + 1 == d => {
                        return Err(EncodingError::DecodeFailure("max above domain".into()))
                    }
                    Some(i) => lo + i as i64 + 1,
                    None => lo,
                }
            };
            vec![value as f64]
        }
        FreqCount => v.iter().map(|&x| x as f64).collect(),
        SetUnion | SetIntersection => {
            let (lo, _) = op.bounds.expect("validated");
            let want_nonzero = op.kind == SetUnion;
            v.iter()
                .enumerate()
                .filter(|(_, &x)| (x != 0) == want_nonzero)
                .map(|(i, _)| (lo + i as i64) as f64)
                .collect()
        }
        Cosim => {
            let den = (v[1] as f64).sqrt() * (v[2] as f64).sqrt();
            if den == 0.0 {
                return Err(EncodingError::DecodeFailure("zero-norm vector".into()));
            }
            vec![v[0] as f64 / den]
        }
        R2 => {
            let mean = v[0] as f64 / s / n;
            let var = v[1] as f64 / (s * s) / n - mean * mean;
            if var <= 0.0 {
                return Err(EncodingError::DecodeFailure("constant response variable".into()));
            }
            vec![1.0 - v[2] as f64 / (s * s) / (n * var)]
        }
        LinReg => {
            let real: Vec<f64> = v.iter().map(|&x| x as f64 / (s * s)).collect();
            solve_linreg(&real, count, op.features)?.coefficients
        }
        LogReg => {
            let agg = LogisticAggregate::from_entries(v, count, op.features, op.logreg.degree, op.scale)?;
            train_logreg(&agg, &op.logreg)?.coefficients
        }
    };
    Ok(DecodedResult {
        kind: op.kind,
        values,
        count,
        warnings,
    })
}
