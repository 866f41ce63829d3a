//! Linear and logistic regression from aggregated sums.
//!
//! Linear regression aggregates the normal-equation entries `Σ x_a x_b` and
//! `Σ y x_a` (with the constant feature `x_0 = 1`) and solves the system.
//!
//! Logistic regression replaces `ln(1 + e^u)` by a polynomial of degree `k`,
//! which turns the cost into a polynomial in `θ` whose coefficients are the
//! sums `A_{τ,r} = Σ_i coef_τ(y_i) Π_j x_{i,r_j}` over index tuples `r`.

use serde::{Deserialize, Serialize};

use super::{fixed, EncodingError};

pub const MAX_DEGREE: usize = 6;

/// Taylor coefficients of `-ln(1 + e^u)` around 0.
const TAYLOR: [f64; MAX_DEGREE + 1] = [
    -std::f64::consts::LN_2,
    -0.5,
    -0.125,
    0.0,
    1.0 / 192.0,
    0.0,
    -1.0 / 2880.0,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum ApproxMethod {
    Taylor,
    /// Least-squares polynomial fit over `[-half_width, half_width]`.
    LeastSquares { half_width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub degree: usize,
    pub approx: ApproxMethod,
    pub learning_rate: f64,
    pub iterations: usize,
    pub lambda: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            degree: 2,
            approx: ApproxMethod::Taylor,
            learning_rate: 0.1,
            iterations: 1000,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    /// `θ_0` (intercept) through `θ_D`.
    pub coefficients: Vec<f64>,
}

impl RegressionModel {
    pub fn predict_linear(&self, x: &[f64]) -> f64 {
        dot(&self.coefficients, x)
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.coefficients, x))
    }
}

fn dot(theta: &[f64], x: &[f64]) -> f64 {
    theta[0] + theta[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
}

pub fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Entry order: `Σ x_a x_b` for `0 <= a <= b <= D` except `(0, 0)` (that is
/// the count), then `Σ y x_a` for `0 <= a <= D`.
fn linreg_pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..=d).flat_map(move |a| (a..=d).map(move |b| (a, b))).skip(1)
}

pub(super) fn encode_linreg(records: &[Vec<f64>], d: usize, s: i64) -> Result<Vec<i64>, EncodingError> {
    let pairs: Vec<_> = linreg_pairs(d).collect();
    let mut v = vec![0i64; pairs.len() + d + 1];
    let mut x = vec![s; d + 1];
    for r in records {
        for j in 0..d {
            x[j + 1] = fixed(r[j], s)?;
        }
        let y = fixed(r[d], s)?;
        for (k, &(a, b)) in pairs.iter().enumerate() {
            v[k] += x[a] * x[b];
        }
        for a in 0..=d {
            v[pairs.len() + a] += y * x[a];
        }
    }
    Ok(v)
}

/// Solves the normal equations given the entries already divided by `s²`.
pub fn solve_linreg(entries: &[f64], count: i64, d: usize) -> Result<RegressionModel, EncodingError> {
    let pairs: Vec<_> = linreg_pairs(d).collect();
    if entries.len() != pairs.len() + d + 1 {
        return Err(EncodingError::DimensionMismatch {
            expected: pairs.len() + d + 1,
            got: entries.len(),
        });
    }
    let mut m = vec![vec![0.0; d + 1]; d + 1];
    m[0][0] = count as f64;
    for (&(a, b), &e) in pairs.iter().zip(entries) {
        m[a][b] = e;
        m[b][a] = e;
    }
    let rhs = entries[pairs.len()..].to_vec();
    Ok(RegressionModel {
        coefficients: solve_linear_system(m, rhs)?,
    })
}

/// Gaussian elimination with partial pivoting.
pub fn solve_linear_system(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, EncodingError> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        if a[piv][col].abs() <= scale * 1e-12 {
            return Err(EncodingError::SingularSystem);
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Polynomial coefficients `a_0..a_k` approximating `-ln(1 + e^u)`.
pub fn approx_coefficients(method: ApproxMethod, k: usize) -> Result<Vec<f64>, EncodingError> {
    if !(1..=MAX_DEGREE).contains(&k) {
        return Err(EncodingError::InvalidArgs(format!("degree {k} not in 1..={MAX_DEGREE}")));
    }
    match method {
        ApproxMethod::Taylor => Ok(TAYLOR[..=k].to_vec()),
        ApproxMethod::LeastSquares { half_width } => {
            if !(half_width > 0.0 && half_width.is_finite()) {
                return Err(EncodingError::InvalidArgs("half_width must be positive".into()));
            }
            let pts = 401;
            let mut ata = vec![vec![0.0; k + 1]; k + 1];
            let mut atb = vec![0.0; k + 1];
            for i in 0..pts {
                let u = -half_width + 2.0 * half_width * i as f64 / (pts - 1) as f64;
                let g = -(1.0 + u.exp()).ln();
                let pows: Vec<f64> = (0..=k).map(|p| u.powi(p as i32)).collect();
                for r in 0..=k {
                    atb[r] += pows[r] * g;
                    for c in 0..=k {
                        ata[r][c] += pows[r] * pows[c];
                    }
                }
            }
            solve_linear_system(ata, atb)
        }
    }
}

/// Digits of `t` in base `d + 1`, most significant first.
fn tuple(mut t: usize, base: usize, tau: usize, out: &mut [usize]) {
    for slot in out[..tau].iter_mut().rev() {
        *slot = t % base;
        t /= base;
    }
}

pub(super) fn encode_logreg(
    records: &[Vec<f64>],
    d: usize,
    k: usize,
    s: i64,
) -> Result<Vec<i64>, EncodingError> {
    let base = d + 1;
    let mut v = Vec::new();
    let mut x = vec![s; base];
    let mut rec = Vec::with_capacity(records.len());
    for r in records {
        let y = r[d];
        if y != 0.0 && y != 1.0 {
            return Err(EncodingError::LabelNotBinary(y));
        }
        for j in 0..d {
            x[j + 1] = fixed(r[j], s)?;
        }
        rec.push((x.clone(), 2 * y as i64 - 1));
    }
    let mut digits = vec![0usize; k];
    for tau in 1..=k {
        for t in 0..base.pow(tau as u32) {
            tuple(t, base, tau, &mut digits);
            let mut acc = 0i64;
            for (x, sign) in &rec {
                let prod: i64 = digits[..tau].iter().map(|&j| x[j]).product();
                acc += if tau % 2 == 1 { sign * prod } else { -prod };
            }
            v.push(acc);
        }
    }
    Ok(v)
}

/// Decoded `A_{τ,r}` sums, one vector per `τ = 1..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticAggregate {
    pub features: usize,
    pub count: f64,
    pub a: Vec<Vec<f64>>,
}

impl LogisticAggregate {
    pub fn from_entries(
        v: &[i64],
        count: i64,
        d: usize,
        k: usize,
        scale: i64,
    ) -> Result<Self, EncodingError> {
        if count <= 0 {
            return Err(EncodingError::ZeroCount);
        }
        let base = d + 1;
        let expected: usize = (1..=k).map(|t| base.pow(t as u32)).sum();
        if v.len() != expected {
            return Err(EncodingError::DimensionMismatch {
                expected,
                got: v.len(),
            });
        }
        let mut a = Vec::with_capacity(k);
        let mut off = 0;
        for tau in 1..=k {
            let len = base.pow(tau as u32);
            let div = (scale as f64).powi(tau as i32);
            a.push(v[off..off + len].iter().map(|&x| x as f64 / div).collect());
            off += len;
        }
        Ok(LogisticAggregate {
            features: d,
            count: count as f64,
            a,
        })
    }

    /// Approximate cost `J_a(θ)` including the L2 penalty on `θ_1..θ_D`.
    pub fn cost(&self, theta: &[f64], coeffs: &[f64], lambda: f64) -> f64 {
        let base = self.features + 1;
        let mut digits = vec![0usize; self.a.len()];
        let mut poly = 0.0;
        for (i, a) in self.a.iter().enumerate() {
            let tau = i + 1;
            let mut s = 0.0;
            for (t, &at) in a.iter().enumerate() {
                tuple(t, base, tau, &mut digits);
                s += at * digits[..tau].iter().map(|&j| theta[j]).product::<f64>();
            }
            poly += coeffs[tau] * s;
        }
        let reg: f64 = theta[1..].iter().map(|t| t * t).sum();
        poly / self.count - coeffs[0] + lambda / (2.0 * self.count) * reg
    }

    pub fn gradient(&self, theta: &[f64], coeffs: &[f64], lambda: f64) -> Vec<f64> {
        let base = self.features + 1;
        let mut digits = vec![0usize; self.a.len()];
        let mut g = vec![0.0; base];
        for (i, a) in self.a.iter().enumerate() {
            let tau = i + 1;
            for (t, &at) in a.iter().enumerate() {
                tuple(t, base, tau, &mut digits);
                for p in 0..tau {
                    let partial: f64 = (0..tau)
                        .filter(|&q| q != p)
                        .map(|q| theta[digits[q]])
                        .product();
                    g[digits[p]] += coeffs[tau] * at * partial;
                }
            }
        }
        for (j, gj) in g.iter_mut().enumerate() {
            *gj /= self.count;
            if j > 0 {
                *gj += lambda * theta[j] / self.count;
            }
        }
        g
    }
}

/// Gradient descent on the approximate cost from `θ = 0`.
pub fn train_logreg(agg: &LogisticAggregate, params: &LogRegParams) -> Result<RegressionModel, EncodingError> {
    let coeffs = approx_coefficients(params.approx, agg.a.len())?;
    let mut theta = vec![0.0; agg.features + 1];
    let start = agg.cost(&theta, &coeffs, params.lambda);
    for _ in 0..params.iterations {
        let g = agg.gradient(&theta, &coeffs, params.lambda);
        for (t, gi) in theta.iter_mut().zip(&g) {
            *t -= params.learning_rate * gi;
        }
        let j = agg.cost(&theta, &coeffs, params.lambda);
        if !j.is_finite() || j.abs() > 1e6 * (1.0 + start.abs()) {
            return Err(EncodingError::Divergence(j));
        }
        if g.iter().all(|x| x.abs() < 1e-12) {
            break;
        }
    }
    Ok(RegressionModel { coefficients: theta })
}
