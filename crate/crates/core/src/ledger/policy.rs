use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LedgerError;

/// Probabilistic verification thresholds: each VN opens a proof with
/// probability `t` and then checks each sub-proof with probability `t_sub`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationPolicy {
    pub t: f64,
    pub t_sub: f64,
    pub f_h: usize,
    pub n_vn: usize,
}

/// `⌈(2n + 1) / 3⌉`.
pub fn default_f_h(n_vn: usize) -> usize {
    (2 * n_vn + 1).div_ceil(3)
}

impl VerificationPolicy {
    pub fn new(n_vn: usize, t: f64, t_sub: f64) -> Self {
        VerificationPolicy {
            t,
            t_sub,
            f_h: default_f_h(n_vn),
            n_vn,
        }
    }

    pub fn validate(&self) -> Result<(), LedgerError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.t) || !unit(self.t_sub) {
            return Err(LedgerError::InvalidPolicy("thresholds must lie in [0, 1]".into()));
        }
        if self.n_vn == 0 || self.f_h == 0 || self.f_h > self.n_vn {
            return Err(LedgerError::InvalidPolicy(format!(
                "need 1 <= f_h <= n_vn, got f_h = {}, n_vn = {}",
                self.f_h, self.n_vn
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    /// Probability that at least one VN opens a given proof.
    pub p_ver: f64,
    /// Probability that at least one VN checks a given sub-proof.
    pub p_ver_sub: f64,
    /// `P_fh` with `p = p_ver`.
    pub p_fh_proof: f64,
    /// `P_fh` with `p = p_ver_sub`.
    pub p_fh_sub: f64,
}

fn binomial_tail(n: usize, k: usize, p: f64) -> f64 {
    let mut c = 1.0f64;
    let mut total = 0.0;
    for i in 0..=n {
        if i > 0 {
            c = c * (n - i + 1) as f64 / i as f64;
        }
        if i >= k {
            total += c * p.powi(i as i32) * (1.0 - p).powi((n - i) as i32);
        }
    }
    total
}

/// `p_ver = 1 - (1-T)^N`, `p_ver_sub = 1 - ((1-T) + T(1-T_sub))^N` and the
/// binomial tails `Σ_{i >= f_h} C(N,i) p^i (1-p)^(N-i)` for both.
pub fn coverage_probability(policy: &VerificationPolicy) -> Result<Coverage, LedgerError> {
    policy.validate()?;
    let n = policy.n_vn;
    let (t, ts) = (policy.t, policy.t_sub);
    let p_ver = 1.0 - (1.0 - t).powi(n as i32);
    let p_ver_sub = 1.0 - ((1.0 - t) + t * (1.0 - ts)).powi(n as i32);
    Ok(Coverage {
        p_ver,
        p_ver_sub,
        p_fh_proof: binomial_tail(n, policy.f_h, p_ver),
        p_fh_sub: binomial_tail(n, policy.f_h, p_ver_sub),
    })
}

/// One simulated verification round of a single sub-proof: which of the
/// `N` VNs open the proof and then check the sub-proof.
fn round<R: Rng + ?Sized>(policy: &VerificationPolicy, rng: &mut R) -> (bool, bool) {
    let (mut opened, mut checked) = (false, false);
    for _ in 0..policy.n_vn {
        if rng.gen::<f64>() < policy.t {
            opened = true;
            if rng.gen::<f64>() < policy.t_sub {
                checked = true;
            }
        }
    }
    (opened, checked)
}

/// Monte Carlo estimate of [`coverage_probability`] by simulating the VNs'
/// coin flips. The `P_fh` estimates count how many of `N` independent
/// rounds reach coverage, mirroring the binomial with `p = p_ver(_sub)`.
pub fn simulate_coverage<R: Rng + ?Sized>(
    policy: &VerificationPolicy,
    trials: usize,
    rng: &mut R,
) -> Result<Coverage, LedgerError> {
    policy.validate()?;
    let (mut ver, mut ver_sub, mut fh, mut fh_sub) = (0usize, 0usize, 0usize, 0usize);
    for _ in 0..trials {
        let (o, c) = round(policy, rng);
        ver += o as usize;
        ver_sub += c as usize;
        let (mut opened, mut checked) = (0, 0);
        for _ in 0..policy.n_vn {
            let (o, c) = round(policy, rng);
            opened += o as usize;
            checked += c as usize;
        }
        fh += (opened >= policy.f_h) as usize;
        fh_sub += (checked >= policy.f_h) as usize;
    }
    let f = |x: usize| x as f64 / trials as f64;
    Ok(Coverage {
        p_ver: f(ver),
        p_ver_sub: f(ver_sub),
        p_fh_proof: f(fh),
        p_fh_sub: f(fh_sub),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::tests::rng;

    #[test]
    fn reference_values() {
        let c = coverage_probability(&VerificationPolicy::new(7, 1.0, 0.3)).unwrap();
        assert_eq!(VerificationPolicy::new(7, 1.0, 0.3).f_h, 5);
        assert!((c.p_fh_sub - 0.9848).abs() < 1e-4, "{c:?}");
        assert_eq!(c.p_ver, 1.0);
        let c = coverage_probability(&VerificationPolicy::new(7, 1.0, 0.2)).unwrap();
        assert!((c.p_fh_sub - 0.8348).abs() < 1e-4, "{c:?}");
        let c = coverage_probability(&VerificationPolicy::new(4, 1.0, 1.0)).unwrap();
        assert_eq!(c.p_fh_sub, 1.0);
    }

    #[test]
    fn binomial_tail_matches_direct_sum() {
        // C(5,3) .4^3 .6^2 + C(5,4) .4^4 .6 + .4^5
        let direct = 10.0 * 0.064 * 0.36 + 5.0 * 0.0256 * 0.6 + 0.01024;
        assert!((binomial_tail(5, 3, 0.4) - direct).abs() < 1e-12);
        assert!((binomial_tail(6, 0, 0.3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_policies() {
        assert!(VerificationPolicy::new(3, 1.5, 0.3).validate().is_err());
        let p = VerificationPolicy { f_h: 4, ..VerificationPolicy::new(3, 1.0, 1.0) };
        assert!(coverage_probability(&p).is_err());
        assert_eq!(default_f_h(1), 1);
        assert_eq!(default_f_h(4), 3);
    }

    #[test]
    fn monte_carlo_agrees() {
        let mut rng = rng();
        for (n, t, ts) in [(7, 1.0, 0.3), (5, 0.6, 0.5), (3, 0.9, 0.2)] {
            let p = VerificationPolicy::new(n, t, ts);
            let exact = coverage_probability(&p).unwrap();
            let sim = simulate_coverage(&p, 20_000, &mut rng).unwrap();
            for (a, b) in [
                (exact.p_ver, sim.p_ver),
                (exact.p_ver_sub, sim.p_ver_sub),
                (exact.p_fh_proof, sim.p_fh_proof),
                (exact.p_fh_sub, sim.p_fh_sub),
            ] {
                assert!((a - b).abs() < 0.015, "{exact:?} vs {sim:?}");
            }
        }
    }
}
