//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Each criterion also has a wall-clock budget.

mod common;

use std::collections::BTreeMap;
use std::convert::Infallible;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use veriquery::elgamal::{decrypt, encrypt, Ciphertext, KeyPair};
use veriquery::encodings::{
    encode_plain, iterative_extreme, iterative_workload, malicious_influence, train_logreg,
    ApproxMethod, BitwiseMode, ExtremeStep, LogRegParams, LogisticAggregate, RegressionModel,
};
use veriquery::encodings::extreme::bitwise_error_prob_exact;
use veriquery::encodings::regression::approx_coefficients;
use veriquery::group::{Bn254, DlogTable, Group, Profile, Ristretto};
use veriquery::ledger::{self, coverage_probability, simulate_coverage, ProofType, VerificationPolicy};
use veriquery::protocols::{cdp_generate, laplace_cdf, quantize_laplace, verify_cdp_chain, CnTree, PrivacyParams};
use veriquery::query::{parse_query, Query};
use veriquery::wire::{Decode, Encode};
use veriquery::zkp::linear::{key_switch_statement, prove_linear, verify_linear, verify_linear_bytes, LABEL_KEY_SWITCH};
use veriquery::zkp::range::{prove_range, prove_range_unchecked, range_setup, verify_range, RangeProof};
use veriquery::zkp::shuffle::{shuffle_and_prove, verify_shuffle, ShuffleProof, DEFAULT_ROUNDS};
use veriquery_node::config::Fault;
use veriquery_node::data::Table;
use veriquery_node::{Config, System};

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion(n: usize, name: &str, limit: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let res = panic::catch_unwind(AssertUnwindSafe(f));
    let took = start.elapsed();
    let (mut ok, mut detail) = match res {
        Ok(Ok(d)) => (true, d),
        Ok(Err(d)) => (false, d),
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            (false, format!("panicked: {msg}"))
        }
    };
    if took > limit {
        ok = false;
        detail.push_str("; over time budget");
    }
    println!(
        "{} {n} {name}: {detail} [{:.1}s of {}s]",
        if ok { "PASS" } else { "FAIL" },
        took.as_secs_f64(),
        limit.as_secs()
    );
    ok
}

fn local(n_cn: usize, n_dp: usize, n_vn: usize, seed: u64) -> Config {
    let mut c = Config::local(n_cn, n_dp, n_vn);
    c.seed = Some(seed);
    c
}

fn on(text: &str, dps: &[String]) -> Query {
    parse_query(&text.replace("{dps}", &dps.join(","))).unwrap()
}

fn coverage() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut parts = Vec::new();
    for (t_sub, want) in [(0.3, 0.9848), (0.2, 0.8348)] {
        let policy = VerificationPolicy::new(7, 1.0, t_sub);
        ensure(policy.f_h == 5, || format!("f_h = {}", policy.f_h))?;
        let exact = coverage_probability(&policy).map_err(|e| e.to_string())?;
        let mc = simulate_coverage(&policy, 100_000, &mut rng).map_err(|e| e.to_string())?;
        ensure((exact.p_fh_sub - want).abs() <= 1e-4, || {
            format!("T_sub {t_sub}: P_fh {:.5}, want {want}", exact.p_fh_sub)
        })?;
        let gaps = [
            (exact.p_ver, mc.p_ver),
            (exact.p_ver_sub, mc.p_ver_sub),
            (exact.p_fh_proof, mc.p_fh_proof),
            (exact.p_fh_sub, mc.p_fh_sub),
        ];
        let worst = gaps.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure(worst <= 0.005, || format!("T_sub {t_sub}: Monte Carlo off by {worst:.4}"))?;
        parts.push(format!(
            "T_sub {t_sub}: P_fh {:.5} (MC {:.5}, max gap {worst:.4})",
            exact.p_fh_sub, mc.p_fh_sub
        ));
    }
    Ok(parts.join(", "))
}

fn extreme_search() -> Check {
    let (g, n) = iterative_workload(1000, 100).map_err(|e| e.to_string())?;
    let factor = 1000.0 / n as f64;
    ensure((g, n) == (3, 128), || format!("g = {g}, n = {n}"))?;
    ensure(format!("{factor:.1}") == "7.8", || format!("factor {factor}"))?;

    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for i in 0..100 {
        let lo = rng.gen_range(-500..500);
        let width = rng.gen_range(1..5000);
        let el = rng.gen_range(1..300);
        let maximize = rng.gen_bool(0.5);
        let values: Vec<i64> = (0..rng.gen_range(1..40)).map(|_| rng.gen_range(lo..lo + width)).collect();
        let want = if maximize {
            *values.iter().max().unwrap()
        } else {
            *values.iter().min().unwrap()
        };
        let mut issued = 0;
        let got = iterative_extreme(lo, lo + width, el, maximize, |step| -> Result<i64, Infallible> {
            issued += 1;
            Ok(match step {
                ExtremeStep::Exists { lo, hi } => values.iter().any(|v| (lo..hi).contains(v)) as i64,
                ExtremeStep::Extreme { lo, hi, maximize } => {
                    let inside = values.iter().copied().filter(|v| (lo..hi).contains(v));
                    if maximize { inside.max() } else { inside.min() }.expect("extreme kept in range")
                }
            })
        })
        .map_err(|e| e.to_string())?
        .unwrap();
        ensure(got.value == want, || format!("instance {i}: {} vs brute force {want}", got.value))?;
        ensure(issued == got.rounds + 1, || format!("instance {i}: {issued} sub-queries"))?;
    }

    // the same search over encrypted sub-queries
    let dps = common::ids("dp", 4);
    let rows = common::random_rows(20, 4, 3, 0, 1000);
    let mut s = System::<Ristretto>::new(local(2, 4, 1, 20), common::tables(&rows)).unwrap();
    for kind in ["max", "min"] {
        let q = on(&format!("SELECT {kind} x ON {{dps}} RANGE 0,1000"), &dps);
        let out = s.run_iterative_extreme(&q, 100).map_err(|e| e.to_string())?;
        let want = common::oracle(&q, &rows)[0] as i64;
        ensure(out.value == want, || format!("encrypted {kind}: {} vs {want}", out.value))?;
        ensure(out.rounds == 3, || format!("encrypted {kind}: {} rounds", out.rounds))?;
    }
    Ok(format!(
        "g = {g}, n = {n}, factor {factor:.4}; 100 plaintext and 2 encrypted searches match brute force"
    ))
}

fn malicious_bound() -> Check {
    let r = malicious_influence(70.0, 99, 1, 100.0, 0).map_err(|e| e.to_string())?;
    ensure((r - 0.0144).abs() <= 1e-4, || format!("{:.4}%", r * 100.0))?;
    Ok(format!("{:.4}%", r * 100.0))
}

/// Fraction of tuples of `n` nonzero residues mod `order` that sum to zero.
fn enumerate_zero_sums(n: u32, order: u64) -> BigRational {
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut digits = vec![1u64; n as usize];
    loop {
        total += 1;
        if digits.iter().sum::<u64>() % order == 0 {
            hits += 1;
        }
        let mut i = 0;
        loop {
            if i == digits.len() {
                return BigRational::new(BigInt::from(hits), BigInt::from(total));
            }
            digits[i] += 1;
            if digits[i] < order {
                break;
            }
            digits[i] = 1;
            i += 1;
        }
    }
}

fn bitwise_error() -> Check {
    for order in [5u64, 7, 11, 13, 17] {
        for n in [2u32, 3, 4] {
            let exact = bitwise_error_prob_exact(n, order).map_err(|e| e.to_string())?;
            let counted = enumerate_zero_sums(n, order);
            ensure(exact == counted, || format!("#G {order}, n {n}: {exact} vs enumerated {counted}"))?;
        }
        let bound = BigRational::new(BigInt::from(1), BigInt::from(order - 1));
        for n in 1..=20 {
            let p = bitwise_error_prob_exact(n, order).map_err(|e| e.to_string())?;
            ensure(p <= bound, || format!("#G {order}, n {n}: {p} above {bound}"))?;
        }
    }
    Ok("15 exact matches, bound holds for n <= 20".into())
}

fn end_to_end() -> Check {
    let dps = common::ids("dp", 10);
    let mut runs = 0;
    for (case, bits) in common::e2e_cases(&dps) {
        for seed in 0..20u64 {
            let rows = common::random_rows(seed, 10, 4, case.data.0, case.data.1);
            let mut q = parse_query(&case.text).unwrap();
            if bits {
                q = q.with_bitwise_mode(BitwiseMode::BitWithObfuscation);
            }
            let mut s = System::<Ristretto>::new(local(3, 10, 3, seed), common::tables(&rows)).unwrap();
            let out = s.run_query(&q).map_err(|e| e.to_string())?;
            let label = format!("{}{} seed {seed}", case.text, if bits { " (bits)" } else { "" });
            let got = &out.value().map_err(|e| format!("{label}: {e}"))?.values;
            let want = common::oracle(&q, &rows);
            ensure(common::matches(q.operation.kind, q.operation.scale, got, &want), || {
                format!("{label}: {got:?} vs {want:?}")
            })?;
            runs += 1;
        }
    }
    Ok(format!("{runs} runs equal the plaintext oracle"))
}

fn read_fixture(name: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let headers = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (headers, rows)
}

/// Gradient descent on the exact regularized logistic loss.
fn train_exact(rows: &[Vec<f64>], p: &LogRegParams) -> RegressionModel {
    let d = rows[0].len() - 1;
    let n = rows.len() as f64;
    let mut theta = vec![0.0; d + 1];
    for _ in 0..p.iterations {
        let mut g = vec![0.0; d + 1];
        for r in rows {
            let u = theta[0] + (0..d).map(|j| theta[j + 1] * r[j]).sum::<f64>();
            let e = 1.0 / (1.0 + (-u).exp()) - r[d];
            g[0] += e;
            for j in 0..d {
                g[j + 1] += e * r[j];
            }
        }
        for j in 0..=d {
            let reg = if j > 0 { p.lambda * theta[j] } else { 0.0 };
            theta[j] -= p.learning_rate * (g[j] + reg) / n;
        }
    }
    RegressionModel { coefficients: theta }
}

fn accuracy(m: &RegressionModel, rows: &[Vec<f64>]) -> f64 {
    let d = rows[0].len() - 1;
    let hits = rows
        .iter()
        .filter(|r| (m.predict_proba(&r[..d]) >= 0.5) == (r[d] == 1.0))
        .count();
    hits as f64 / rows.len() as f64
}

fn logistic_regression() -> Check {
    let (headers, train) = read_fixture("breast_cancer_train.csv");
    let (_, test) = read_fixture("breast_cancer_test.csv");
    let d = headers.len() - 1;
    let dps = common::ids("dp", 10);
    let parts: BTreeMap<String, Vec<Vec<f64>>> = dps
        .iter()
        .enumerate()
        .map(|(i, dp)| (dp.clone(), train.iter().skip(i).step_by(10).cloned().collect()))
        .collect();
    let names: Vec<&str> = headers.iter().map(String::as_str).collect();
    let tables = parts.iter().map(|(dp, r)| (dp.clone(), Table::numeric(&names, r))).collect();

    let mut q = on(&format!("SELECT log_reg {} ON {{dps}}", headers.join(",")), &dps);
    q.operation.logreg.approx = ApproxMethod::LeastSquares { half_width: 4.0 };
    let op = q.operation.clone();
    let mut s = System::<Ristretto>::new(local(3, 10, 3, 6), tables).unwrap();
    let out = s.run_query(&q).map_err(|e| e.to_string())?;
    let model = RegressionModel {
        coefficients: out.value().map_err(|e| e.to_string())?.values.clone(),
    };

    // (a) the decrypted aggregate equals the plaintext one
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut plain = vec![0i64; op.dimension()];
    for r in parts.values() {
        let p = encode_plain(&op, r, &mut rng).map_err(|e| e.to_string())?;
        for (a, b) in plain.iter_mut().zip(&p.v) {
            *a += b;
        }
    }
    let (count, entries) = out.result.aggregate.split_last().ok_or("no aggregate")?;
    ensure(entries == plain.as_slice(), || "decrypted aggregate differs from plaintext sums".into())?;
    ensure(*count == train.len() as i64, || format!("count {count}"))?;

    // (b) accuracy against the exact-loss trainer
    let reference = train_exact(&train, &op.logreg);
    let (acc, ref_acc) = (accuracy(&model, &test), accuracy(&reference, &test));
    let agg = LogisticAggregate::from_entries(entries, *count, d, op.logreg.degree, op.scale)
        .map_err(|e| e.to_string())?;
    let taylor = LogRegParams {
        approx: ApproxMethod::Taylor,
        ..op.logreg.clone()
    };
    let taylor_acc = accuracy(&train_logreg(&agg, &taylor).map_err(|e| e.to_string())?, &test);
    let gap = (ref_acc - acc) * 100.0;
    ensure(gap.abs() <= 2.0, || {
        format!("accuracy {:.2}% vs exact {:.2}% ({gap:.2}pp)", acc * 100.0, ref_acc * 100.0)
    })?;

    // (c) analytic gradient of the approximate cost against central differences
    let coeffs = approx_coefficients(op.logreg.approx, op.logreg.degree).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let theta: Vec<f64> = (0..=d).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let g = agg.gradient(&theta, &coeffs, op.logreg.lambda);
        let h = 1e-5;
        let fd: Vec<f64> = (0..=d)
            .map(|j| {
                let (mut a, mut b) = (theta.clone(), theta.clone());
                a[j] += h;
                b[j] -= h;
                (agg.cost(&a, &coeffs, op.logreg.lambda) - agg.cost(&b, &coeffs, op.logreg.lambda)) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(&g));
    }
    ensure(worst < 1e-6, || format!("gradient relative error {worst:.2e}"))?;
    Ok(format!(
        "aggregate exact over {} entries; accuracy {:.2}% vs exact-loss {:.2}% ({gap:.2}pp; Taylor {:.2}%); gradient rel. error {worst:.1e}",
        entries.len(),
        acc * 100.0,
        ref_acc * 100.0,
        taylor_acc * 100.0
    ))
}

fn flip_bit(bytes: &[u8], pos: usize) -> Vec<u8> {
    let mut out = bytes.to_vec();
    out[pos / 8] ^= 1 << (pos % 8);
    out
}

/// Flips one random bit per trial; returns how many mutants were accepted.
fn fuzz(bytes: &[u8], trials: usize, rng: &mut ChaCha20Rng, accept: impl Fn(&[u8]) -> bool) -> usize {
    (0..trials)
        .filter(|_| accept(&flip_bit(bytes, rng.gen_range(0..bytes.len() * 8))))
        .count()
}

fn soundness() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let trials = 1000;

    type R = Ristretto;
    let mut linear = Vec::new();
    for _ in 0..100 {
        let k = R::scalar_random(&mut rng);
        let alpha = R::scalar_random(&mut rng);
        let c1 = R::mul_base(&R::scalar_random(&mut rng));
        let target = R::mul_base(&R::scalar_random(&mut rng));
        let st = key_switch_statement::<R>(
            &R::mul_base(&k),
            &c1,
            &target,
            &R::mul_base(&alpha),
            &(-c1 * k + target * alpha),
        );
        linear.push(prove_linear(&[k, alpha], st, LABEL_KEY_SWITCH, &mut rng));
    }
    ensure(linear.iter().all(|p| verify_linear(p, LABEL_KEY_SWITCH)), || {
        "honest key-switch proof rejected".into()
    })?;
    let bytes = linear[0].to_bytes();
    let lin_false = fuzz(&bytes, trials, &mut rng, |b| {
        verify_linear_bytes::<R>(b, LABEL_KEY_SWITCH).unwrap_or(false)
    });

    type B = Bn254;
    let (u, l) = (16u64, 2u32);
    let bound = (u.pow(l)) as i64;
    let (_, sigs) = range_setup::<B, _>(u, 3, &mut rng).map_err(|e| e.to_string())?;
    let omega = B::mul_base(&B::scalar_random(&mut rng));
    let mut honest = Vec::new();
    let mut ms = vec![0, 1, bound - 1];
    ms.extend((0..17).map(|_| rng.gen_range(0..bound)));
    for m in ms {
        let r = B::scalar_random(&mut rng);
        honest.push(prove_range(m, &r, &omega, &sigs, l, &mut rng).map_err(|e| e.to_string())?);
    }
    ensure(honest.iter().all(|p| verify_range(p, &sigs, &omega)), || {
        "honest range proof rejected".into()
    })?;
    for m in [bound, bound + 1, 2 * bound] {
        let r = B::scalar_random(&mut rng);
        ensure(prove_range(m, &r, &omega, &sigs, l, &mut rng).is_err(), || {
            format!("prove_range accepted m = {m}")
        })?;
        let forged = prove_range_unchecked(m, &r, &omega, &sigs, l, &mut rng).map_err(|e| e.to_string())?;
        ensure(!verify_range(&forged, &sigs, &omega), || format!("forged transcript for m = {m} verified"))?;
    }
    let bytes = honest[3].to_bytes();
    let range_false = fuzz(&bytes, trials, &mut rng, |b| {
        RangeProof::<B>::from_bytes(b).is_ok_and(|p| verify_range(&p, &sigs, &omega))
    });

    let kp = KeyPair::<R>::generate(&mut rng);
    let inputs: Vec<Ciphertext<R>> = (0..4)
        .map(|m| encrypt::<R, _>(kp.public(), m * 10, 1 << 16, &mut rng).unwrap())
        .collect();
    let mut shuffles = Vec::new();
    for _ in 0..10 {
        let (_, p) = shuffle_and_prove(&inputs, kp.public(), DEFAULT_ROUNDS, &mut rng).map_err(|e| e.to_string())?;
        shuffles.push(p);
    }
    ensure(shuffles.iter().all(verify_shuffle), || "honest shuffle proof rejected".into())?;
    let bytes = shuffles[0].to_bytes();
    let shuffle_false = fuzz(&bytes, trials, &mut rng, |b| {
        ShuffleProof::<R>::from_bytes(b).is_ok_and(|p| verify_shuffle(&p))
    });

    ensure(lin_false + range_false + shuffle_false == 0, || {
        format!("false accepts: linear {lin_false}, range {range_false}, shuffle {shuffle_false}")
    })?;
    Ok(format!(
        "0 false accepts in {trials} flips each; 100/20/10 honest linear/range/shuffle proofs verify; m in {{{bound}, {}, {}}} refused and forged",
        bound + 1,
        2 * bound
    ))
}

fn audit_path() -> Check {
    let dps = common::ids("dp", 5);
    let rows = common::random_rows(8, 5, 10, 0, 100);
    let mut config = local(3, 5, 3, 8);
    config.profile = Profile::Bn254;
    config.verification.t = 1.0;
    config.verification.t_sub = 1.0;
    config.dp[2].fault = Some(Fault::OutOfRange);
    let mut s = System::<Bn254>::new(config, common::tables(&rows)).unwrap();
    let out = s
        .run_query(&on("SELECT sum x ON {dps} RANGE 0,100000", &dps))
        .map_err(|e| e.to_string())?;
    let report = s.audit(out.query_id()).map_err(|e| e.to_string())?;
    let f_h = s.shared().policy.f_h;
    ensure(report.false_entries.len() == 1, || {
        format!("{} false entries", report.false_entries.len())
    })?;
    let bad = &report.false_entries[0];
    ensure(bad.proof_type == ProofType::Range && bad.prover == "dp2", || {
        format!("false entry is {} by {}", bad.proof_type.name(), bad.prover)
    })?;
    ensure(report.valid_signatures >= f_h, || {
        format!("{} signatures, f_h {f_h}", report.valid_signatures)
    })?;

    let vn = &s.shared().vns[0];
    let bytes = s.chain(vn).unwrap().to_bytes();
    let keys = &s.shared().vn_keys;
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let tampers = 1000;
    let survived = (0..tampers)
        .filter(|_| {
            let mut t = bytes.clone();
            let i = rng.gen_range(0..t.len());
            t[i] ^= rng.gen_range(1..=255u8);
            ledger::audit(&t, out.query_id(), keys, f_h).is_ok()
        })
        .count();
    ensure(survived == 0, || format!("{survived} of {tampers} tampered chains still audit"))?;
    Ok(format!(
        "one false range entry by dp2; {} of {} signatures valid (f_h {f_h}); all {tampers} single-byte tampers break audit",
        report.valid_signatures,
        s.shared().vns.len()
    ))
}

/// Kolmogorov distance between the empirical CDF of `xs` and `cdf`.
fn kolmogorov(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = xs.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let mut j = i;
        while j < xs.len() && xs[j] == xs[i] {
            j += 1;
        }
        let f = cdf(xs[i]);
        d = d.max((f - i as f64 / n).abs()).max((j as f64 / n - f).abs());
        i = j;
    }
    d
}

fn cdp_distribution() -> Check {
    let params = PrivacyParams {
        epsilon: 1.0,
        delta_f: 1.0,
        theta: 0.5,
        list_len: 100,
    };
    let values = quantize_laplace(&params).map_err(|e| e.to_string())?;
    let ks = kolmogorov(&values, |x| laplace_cdf(x, 1.0));

    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let kp = KeyPair::<Ristretto>::generate(&mut rng);
    let tree = CnTree::balanced(&common::ids("cn", 3)).map_err(|e| e.to_string())?;
    let (list, proofs) =
        cdp_generate(&params, 100, &tree, kp.public(), DEFAULT_ROUNDS, &mut rng).map_err(|e| e.to_string())?;
    let table = DlogTable::<Ristretto>::new(1 << 12);
    let mut got: Vec<i64> = list
        .encrypted
        .iter()
        .map(|ct| decrypt(ct, kp.secret(), &table))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut want = list.values.clone();
    got.sort_unstable();
    want.sort_unstable();
    ensure(got == want, || "decrypted noise list is not the quantized multiset".into())?;
    let chain: Vec<_> = proofs.into_iter().map(|(_, p)| p).collect();
    ensure(verify_cdp_chain(&list.values, &chain, kp.public(), &list.encrypted), || {
        "shuffle chain does not verify".into()
    })?;
    let detail = format!("KS distance {ks:.4} (limit 0.1); 3-CN shuffled list decrypts to the same multiset");
    if ks <= 0.1 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        criterion(1, "verification coverage", secs(10), coverage),
        criterion(2, "iterative extreme", secs(30), extreme_search),
        criterion(3, "malicious provider bound", secs(1), malicious_bound),
        criterion(4, "bitwise error probability", secs(5), bitwise_error),
        criterion(5, "end-to-end oracle", secs(300), end_to_end),
        criterion(6, "logistic regression", secs(120), logistic_regression),
        criterion(7, "proof soundness", secs(120), soundness),
        criterion(8, "audit path", secs(60), audit_path),
        criterion(9, "noise distribution", secs(30), cdp_distribution),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria pass", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
