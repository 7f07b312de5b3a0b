//! End-to-end acceptance checks, one PASS/FAIL line per criterion.

use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use clawbell::bits::BitString;
use clawbell::circuits::phase::{phase_circuit, phase_circuit_resources, PhaseVariant};
use clawbell::circuits::statevec::StateVector;
use clawbell::circuits::{build_for_modulus, count_resources, evaluate_classical, CircuitKind};
use clawbell::extractor::{extract_and_factor, lemma1_bound, ExtractError, GlParams, SyntheticOracle};
use clawbell::postselect::{run_sweep, threshold_of, Estimator, SweepConfig, SweepRow};
use clawbell::protocol::{ScoreReport, Verifier, VerifierConfig};
use clawbell::provers::{optimal_theta, pm_of_theta, AngleModel, Cheater, IdealProver, Prover};
use clawbell::tcf::numtheory::is_prime_u64;
use clawbell::tcf::{rabin_gen, PublicKey, RabinKeyPair, SecurityParams, VerifierKey};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rabin(bits: u32, seed: u64) -> RabinKeyPair {
    rabin_gen(SecurityParams { n_bits: bits, rng_seed: seed }).expect("key generation")
}

fn play(prover: &mut dyn Prover, trials: u64, seed: u64) -> ScoreReport {
    let vk = VerifierKey::rabin(rabin(32, 1));
    let mut verifier = Verifier::new(vk, VerifierConfig::default(), seed).expect("verifier");
    verifier.run(prover, trials, |_| ()).expect("protocol run").report().expect("enough data")
}

/// Binomial standard error of an acceptance frequency.
fn sigma(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn completeness() -> Verdict {
    let start = Instant::now();
    let r = play(&mut IdealProver::new(7), 100_000, 11);
    let elapsed = start.elapsed();
    let pm_want = FRAC_PI_8.cos().powi(2);
    let s_m = sigma(pm_want, r.trials_m);
    let score_want = 2f64.sqrt() - 1.0;
    let ok = r.accepts_x == r.trials_x
        && (r.p_m_f64() - pm_want).abs() <= 3.0 * s_m
        && (r.score_f64() - score_want).abs() <= 3.0 * 4.0 * s_m
        && elapsed < Duration::from_secs(60);
    check(
        ok,
        format!(
            "p_x = {}, p_m = {:.5} (want {pm_want:.5} +- {:.5}), score = {:.5} (want {score_want:.5} +- {:.5}), {:.1?}",
            r.p_x,
            r.p_m_f64(),
            3.0 * s_m,
            r.score_f64(),
            12.0 * s_m,
            elapsed
        ),
    )
}

fn soundness() -> Verdict {
    let r = play(&mut Cheater::new(7), 100_000, 12);
    let s_m = sigma(0.75, r.trials_m);
    let (lo, hi) = r.interval();
    let ok = (r.p_m_f64() - 0.75).abs() <= 3.0 * s_m && lo <= 0.0 && 0.0 <= hi && hi < 0.1;
    check(ok, format!("p_m = {:.5} (want 0.75 +- {:.5}), score CI [{lo:.4}, {hi:.4}]", r.p_m_f64(), 3.0 * s_m))
}

fn extraction_successes(make: impl Fn(u64) -> Box<dyn Prover>) -> u32 {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..100u64)
        .filter(|&i| {
            let bits = 24 + (i % 9) as u32;
            let key = VerifierKey::rabin(rabin(bits, 500 + i)).public();
            let params = GlParams::for_width(key.domain_bits(), GlParams::DEFAULT_MU).expect("params");
            let mut prover = make(i);
            match extract_and_factor(&mut *prover, &key, &params, &mut rng) {
                Ok(report) => {
                    let PublicKey::Rabin(pk) = &key else { unreachable!() };
                    report.factors.is_some_and(|(p, q)| p * q == pk.n)
                }
                Err(ExtractError::ExtractionFailed { .. }) => false,
                Err(e) => panic!("extraction error: {e}"),
            }
        })
        .count() as u32
}

fn extraction() -> Verdict {
    let ideal = extraction_successes(|i| Box::new(IdealProver::new(i)));
    let cheater = extraction_successes(|i| Box::new(Cheater::new(i)));
    check(ideal >= 90 && cheater <= 1, format!("ideal {ideal}/100 factored, cheater {cheater}/100"))
}

fn lemma1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 12;
    let mut worst = f64::INFINITY;
    for plant in 0..50u64 {
        let ys = rng.random_range(20..60);
        let mu: f64 = rng.random_range(0.02..0.3);
        let clean = rng.random_range(0.5..0.95);
        let rates: Vec<f64> = (0..ys)
            .map(|_| if rng.random_bool(clean) { rng.random_range(0.0..0.25) } else { rng.random_range(0.25..1.0) })
            .collect();
        let measured: Vec<f64> = rates
            .iter()
            .enumerate()
            .map(|(i, &e)| {
                let secret = BitString::random(n, &mut rng);
                SyntheticOracle::new(secret, 1.0 - e, plant << 32 | i as u64).exact_noise_rate()
            })
            .collect();
        let eps = measured.iter().sum::<f64>() / ys as f64;
        let good = measured.iter().filter(|&&e| e <= 0.5 - mu).count() as f64 / ys as f64;
        worst = worst.min(good - lemma1_bound(eps, mu));
        if good < lemma1_bound(eps, mu) {
            return Err(format!("plant {plant}: good fraction {good:.3} below bound {:.3}", lemma1_bound(eps, mu)));
        }
    }
    Ok(format!("50 plants, smallest margin over the bound {worst:.3}"))
}

fn blum_up_to(limit: u64) -> Vec<u64> {
    let primes: Vec<u64> = (3..limit).filter(|&p| p % 4 == 3 && is_prime_u64(p)).collect();
    let mut out: Vec<u64> = primes
        .iter()
        .enumerate()
        .flat_map(|(i, &p)| primes[i + 1..].iter().map(move |&q| p * q))
        .filter(|&n| n <= limit)
        .collect();
    out.sort_unstable();
    out
}

fn squaring_mismatches(kind: CircuitKind, n: u64) -> u64 {
    let c = build_for_modulus(kind, &BigUint::from(n), 0);
    let rp = u64::try_from(&c.meta.r_prime).expect("small modulus");
    (0..n.div_ceil(2))
        .filter(|&x| {
            let out = evaluate_classical(&c, &BitString::from_u64(x, c.x_reg.len())).expect("valid circuit");
            u64::try_from(out.output.to_biguint()).ok() != Some(x * x % n * rp % n)
        })
        .count() as u64
}

/// Smallest probability, over inputs `x < N`, of reading out `x^2 mod N`.
fn phase_readout_mass(n: u32) -> f64 {
    let modulus = BigUint::from(n);
    let c = phase_circuit(PhaseVariant::Ancilla, &modulus);
    (0..u64::from(n))
        .map(|x| {
            let mut s = StateVector::basis(c.n_qubits, x as usize);
            for g in &c.gates {
                s.apply(g).expect("unitary gate");
            }
            let want = BigUint::from(x * x % u64::from(n));
            s.marginal(&c.readout)
                .iter()
                .enumerate()
                .filter(|(j, _)| c.decode(&modulus, *j as u64) == want)
                .map(|(_, p)| p)
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn circuit_semantics() -> Verdict {
    let moduli = blum_up_to(1000);
    let kinds = [CircuitKind::Schoolbook, CircuitKind::Karatsuba { cutoff: 8 }];
    let bad: u64 = moduli.iter().flat_map(|&n| kinds.iter().map(move |&k| squaring_mismatches(k, n))).sum();
    let (m21, m33) = (phase_readout_mass(21), phase_readout_mass(33));
    check(
        bad == 0 && m21 > 0.8 && m33 > 0.8,
        format!(
            "{} Blum moduli, {bad} mismatches; phase circuit 1 readout mass >= {m21:.3} (N=21), {m33:.3} (N=33)",
            moduli.len()
        ),
    )
}

fn resources() -> Verdict {
    let keys = rabin(128, 0);
    let within = |got: u64, want: f64| (got as f64) <= 2.0 * want && (got as f64) >= want / 2.0;
    let school = count_resources(&build_for_modulus(CircuitKind::Schoolbook, &keys.n, 0));
    let kara = count_resources(&build_for_modulus(CircuitKind::karatsuba(), &keys.n, 0));
    let p1 = phase_circuit_resources(PhaseVariant::Ancilla, 128).expect("n >= 8");
    let p2 = phase_circuit_resources(PhaseVariant::Counter, 128).expect("n >= 8");
    let ok = within(school.qubits, 515.0)
        && within(school.total_gates, 9.1e5)
        && within(kara.qubits, 942.0)
        && within(kara.total_gates, 7.7e5)
        && within(p1.qubits, 128.0)
        && within(p1.total_gates, 1.1e6)
        && within(p2.total_gates, 4.3e5);
    check(
        ok,
        format!(
            "schoolbook {}q/{}g, karatsuba {}q/{}g, phase 1 {}q/{}g, phase 2 {}g",
            school.qubits, school.total_gates, kara.qubits, kara.total_gates, p1.qubits, p1.total_gates, p2.total_gates
        ),
    )
}

fn sweep_rows(keys: &RabinKeyPair, m: u32, grid: &[f64], runs: u64) -> Vec<SweepRow> {
    let mut cfg = SweepConfig::new(vec![m], grid.to_vec(), runs, 64);
    cfg.estimator = Estimator::StateAnalysis;
    run_sweep(&cfg, keys).expect("sweep")
}

fn post_selection() -> Verdict {
    let keys = rabin(SweepConfig::DEFAULT_BITS, 1);
    let plan: [(u32, &[f64], u64); 4] = [
        (0, &[0.35, 0.45, 0.55, 0.65], 3000),
        (1, &[0.1, 0.15, 0.2, 0.25, 0.3], 5000),
        (2, &[0.06, 0.08, 0.1, 0.13, 0.16], 8000),
        (3, &[0.03, 0.05, 0.07, 0.1], 20_000),
    ];
    let mut thresholds = Vec::new();
    let mut m3_rows = Vec::new();
    for (m, grid, runs) in plan {
        let rows = sweep_rows(&keys, m, grid, runs);
        thresholds.push(threshold_of(&rows).map_err(|e| format!("m = {m}: {e}"))?);
        if m == 3 {
            m3_rows = rows;
        }
    }
    let a = (0.40..=0.62).contains(&thresholds[0]);
    let b = thresholds.windows(2).all(|w| w[1] < w[0]);
    let best = m3_rows
        .iter()
        .filter(|r| r.f <= 0.05)
        .max_by(|x, y| (x.score - x.ci_halfwidth).total_cmp(&(y.score - y.ci_halfwidth)))
        .expect("grid has F <= 0.05");
    let c = best.score - best.ci_halfwidth > 0.0;
    let mut d = true;
    let mut discards = Vec::new();
    for m in 1..=3 {
        let row = &sweep_rows(&keys, m, &[1e-6], 4000)[0];
        let want = 1.0 - 9f64.powi(-(m as i32));
        d &= (row.discard_rate - want).abs() <= 0.02;
        discards.push(format!("{:.4}/{want:.4}", row.discard_rate));
    }
    let fmt: Vec<String> = thresholds.iter().map(|t| format!("{t:.3}")).collect();
    check(
        a && b && c && d,
        format!(
            "(a) {} (b) {} (c) {} (d) {}: thresholds m=0..3 [{}], m=3 score {:.4} +- {:.4} at F = {}, full-corruption discard {}",
            a,
            b,
            c,
            d,
            fmt.join(", "),
            best.score,
            best.ci_halfwidth,
            best.f,
            discards.join(", ")
        ),
    )
}

fn angle_adaptation() -> Verdict {
    let pm = |a: f64, b: f64, t: f64| pm_of_theta(&AngleModel::new(a, b, t).expect("valid model"));
    let mut argmax = true;
    for i in 1..=20 {
        for j in 1..=20 {
            let (a, b) = (0.5 + 0.025 * f64::from(i), 0.5 + 0.025 * f64::from(j));
            let best = match optimal_theta(a, b) {
                Ok(t) => pm(a, b, t),
                Err(_) => continue,
            };
            argmax &= (0..1000).all(|k| best >= pm(a, b, -PI / 2.0 + PI * (f64::from(k) + 0.5) / 1000.0) - 1e-12);
        }
    }
    let delta = 0.2;
    let trials = 200_000;
    let run = |theta: Option<f64>, seed: u64| {
        play(&mut IdealProver::phase_noise(delta, theta, seed).expect("valid delta"), trials, seed)
    };
    let opt = run(None, 21);
    let nominal = run(Some(FRAC_PI_4), 22);
    let small = run(Some(delta), 23);
    let want = 0.75 + 3.0 * delta * delta / 8.0;
    let s_m = sigma(want, small.trials_m);
    let ok = argmax
        && opt.score_f64() > 0.0
        && nominal.score_f64() <= nominal.ci_halfwidth
        && (small.p_m_f64() - want).abs() <= 3.0 * s_m;
    check(
        ok,
        format!(
            "argmax {argmax}; score {:.4} at optimal angle, {:.4} (CI {:.4}) at pi/4; p_m {:.5} at theta = delta (want {want:.4} +- {:.4})",
            opt.score_f64(),
            nominal.score_f64(),
            nominal.ci_halfwidth,
            small.p_m_f64(),
            3.0 * s_m
        ),
    )
}

fn determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_clawbell");
    let dir = std::env::temp_dir().join(format!("clawbell-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let key = dir.join("key.json");
    let key = key.to_str().expect("utf-8 path");
    let runs: Vec<Vec<String>> = vec![
        vec!["keygen".into(), "--bits".into(), "48".into(), "--seed".into(), "5".into()],
        vec![
            "run".into(),
            "--prover".into(),
            "noisy:F=0.6,circuit=schoolbook".into(),
            "--bits".into(),
            "24".into(),
            "--trials".into(),
            "400".into(),
            "--seed".into(),
            "3".into(),
        ],
        vec![
            "run".into(),
            "--prover".into(),
            "phase:delta=0.2".into(),
            "--trials".into(),
            "2000".into(),
            "--seed".into(),
            "4".into(),
        ],
        vec![
            "sweep".into(),
            "--bits".into(),
            "20".into(),
            "--m".into(),
            "0,1".into(),
            "--fidelities".into(),
            "0.5,1".into(),
            "--trials".into(),
            "300".into(),
            "--seed".into(),
            "5".into(),
        ],
        vec!["extract".into(), "--bits".into(), "26".into(), "--seed".into(), "6".into()],
        vec!["resources".into(), "--builder".into(), "karatsuba".into(), "--n".into(), "64".into()],
        vec![
            "verify".into(),
            "--key".into(),
            key.into(),
            "--trials".into(),
            "500".into(),
            "--seed".into(),
            "7".into(),
            "--spawn".into(),
            format!("{bin} prove --prover ideal --seed 8"),
        ],
    ];
    let out = |args: &[String]| -> Result<Vec<u8>, String> {
        let o = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr)));
        }
        Ok(o.stdout)
    };
    out(&["keygen".into(), "--bits".into(), "32".into(), "--seed".into(), "9".into(), "--out".into(), key.into()])?;
    for args in &runs {
        if out(args)? != out(args)? {
            return Err(format!("{} differs between runs", args[0]));
        }
    }
    Ok(format!("{} subcommands byte-identical across repeated runs", runs.len()))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Verdict); 9] = [
        (1, "completeness", completeness),
        (2, "soundness saturation", soundness),
        (3, "extraction", extraction),
        (4, "lemma 1", lemma1),
        (5, "circuit semantics", circuit_semantics),
        (6, "resource counts", resources),
        (7, "post-selection", post_selection),
        (8, "angle adaptation", angle_adaptation),
        (9, "determinism", determinism),
    ];
    let mut failed = 0;
    for (i, name, f) in criteria {
        let start = Instant::now();
        let verdict = f();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(d) => println!("criterion {i} ({name}): PASS [{secs:.1}s] {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {i} ({name}): FAIL [{secs:.1}s] {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
