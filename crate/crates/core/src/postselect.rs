//! Redundancy-based error mitigation: lift `x^2 mod N` to `(kx)^2 mod k^2 N` with
//! `k = 3^m`, drop every `y` that is not a multiple of `k^2`, and sweep circuit fidelity.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::circuits::{self, Circuit, CircuitKind};
use crate::protocol::{ProtocolError, RoundMessage, Tally, Verifier, VerifierConfig};
use crate::provers::{
    assess_run, noisy_gate_count, noisy_round1, pm_of_theta, splitmix, AngleModel, FidelityTally, NoiseModel,
    NoisyConfig, NoisyProver, Simulator,
};
use crate::tcf::{Image, RabinKeyPair, VerifierKey};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SweepError {
    #[error("invalid sweep configuration: {0}")]
    BadConfig(String),
    #[error("no sign change in score across the rows")]
    NoCrossing,
    #[error("sweep point (m = {m}, F = {f}) failed: {reason}")]
    Point { m: u32, f: f64, reason: String },
}

/// Base key with its lift and the circuit computing the lifted function.
#[derive(Debug, Clone)]
pub struct LiftedKey {
    pub base: RabinKeyPair,
    pub m: u32,
    pub k: BigUint,
    pub n_lifted: BigUint,
    pub circuit: Arc<Circuit>,
}

impl LiftedKey {
    pub fn verifier_key(&self) -> VerifierKey {
        VerifierKey::Rabin { keys: self.base.clone(), lift: self.m }
    }

    /// `k^2`, the modulus every valid image is a multiple of.
    pub fn k2(&self) -> BigUint {
        &self.k * &self.k
    }
}

/// Lifts by `k = 3^m`; `m = 0` is the identity.
pub fn lift_key(keys: &RabinKeyPair, m: u32, kind: CircuitKind) -> LiftedKey {
    let k = BigUint::from(3u32).pow(m);
    let n_lifted = &k * &k * &keys.n;
    let circuit = Arc::new(circuits::build_for_modulus(kind, &keys.n, m));
    LiftedKey { base: keys.clone(), m, k, n_lifted, circuit }
}

pub fn is_valid_y(y: &BigUint, k: &BigUint) -> bool {
    (y % (k * k)).is_zero()
}

/// Fraction `1 - 1/k^2` of uniformly corrupted images the validity check rejects.
pub fn rejection_power(k: &BigUint) -> f64 {
    let k = k.to_f64().unwrap_or(f64::INFINITY);
    1.0 - 1.0 / (k * k)
}

/// Who throws away invalid images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiscardSide {
    /// The prover reruns its circuit until `y` is valid.
    Prover,
    /// The verifier silently drops the iteration.
    Verifier,
}

/// How a sweep point turns circuit runs into a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Play the protocol against the noisy prover and score its answers.
    Protocol,
    /// Read the expected success rates off each run's final branches and phase. Far
    /// lower variance per run; needs the trapdoor, which the simulator has anyway.
    StateAnalysis,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub m_values: Vec<u32>,
    pub fidelity_grid: Vec<f64>,
    /// Verifier iterations per `(m, F)` point.
    pub trials_per_point: u64,
    pub seed: u64,
    pub circuit: CircuitKind,
    pub discard: DiscardSide,
    pub estimator: Estimator,
    /// Per-`(m, F)` multiplier on `trials_per_point`; low-fidelity points need more
    /// iterations to retain the same number of scored ones.
    pub trial_scale: Option<fn(u32, f64) -> f64>,
}

impl SweepConfig {
    pub const DEFAULT_BITS: u32 = 64;

    pub fn new(m_values: Vec<u32>, fidelity_grid: Vec<f64>, trials_per_point: u64, seed: u64) -> Self {
        Self {
            m_values,
            fidelity_grid,
            trials_per_point,
            seed,
            circuit: CircuitKind::Schoolbook,
            discard: DiscardSide::Verifier,
            estimator: Estimator::Protocol,
            trial_scale: None,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        if self.m_values.is_empty() || self.fidelity_grid.is_empty() {
            return Err(SweepError::BadConfig("m values and fidelity grid must be nonempty".into()));
        }
        if self.trials_per_point < 100 {
            return Err(SweepError::BadConfig(format!(
                "{} trials per point; at least 100 needed",
                self.trials_per_point
            )));
        }
        if let Some(f) = self.fidelity_grid.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
            return Err(SweepError::BadConfig(format!("fidelity {f} outside (0, 1]")));
        }
        Ok(())
    }

    fn trials_for(&self, m: u32, f: f64) -> u64 {
        let scale = self.trial_scale.map_or(1.0, |s| s(m, f).max(1.0));
        (self.trials_per_point as f64 * scale).ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: u32,
    #[serde(rename = "F")]
    pub f: f64,
    pub p_x: f64,
    pub p_m: f64,
    pub score: f64,
    pub ci_halfwidth: f64,
    /// Fraction of circuit runs whose `y` is not a multiple of `k^2`.
    pub discard_rate: f64,
    pub overhead: f64,
    pub iterations: u64,
    pub scored: u64,
    pub circuit_runs: u64,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "m,F,p_x,p_m,score,discard_rate,overhead";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.m, self.f, self.p_x, self.p_m, self.score, self.discard_rate, self.overhead
        )
    }
}

/// CSV with the standard header, one line per row.
pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SweepRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv());
        out.push('\n');
    }
    out
}

/// Seed for one sweep point; independent of the order points are run in.
pub fn point_seed(seed: u64, m: u32, f: f64) -> u64 {
    splitmix(splitmix(seed ^ u64::from(m)) ^ f.to_bits())
}

/// Expected size overhead of running the lifted circuit until one valid image.
pub fn runtime_overhead(lifted_gates: u64, base_gates: u64, discard_rate: f64) -> f64 {
    let ratio = lifted_gates as f64 / base_gates.max(1) as f64;
    if discard_rate >= 1.0 {
        f64::INFINITY
    } else {
        ratio / (1.0 - discard_rate)
    }
}

/// Runs one `(m, F)` point with the configured estimator.
pub fn run_point(config: &SweepConfig, lifted: &LiftedKey, base_gates: u64, f: f64) -> Result<SweepRow, SweepError> {
    match config.estimator {
        Estimator::Protocol => protocol_point(config, lifted, base_gates, f),
        Estimator::StateAnalysis => analysed_point(config, lifted, base_gates, f),
    }
}

fn noisy_prover(config: &SweepConfig, vk: &VerifierKey, m: u32, f: f64, seed: u64) -> NoisyProver {
    let mut cfg = NoisyConfig::new(f, config.circuit);
    cfg.lift = Some(m);
    cfg.postselect = config.discard == DiscardSide::Prover;
    NoisyProver::with_simulator(cfg, Simulator::from_trapdoor(vk.clone()), seed)
}

fn protocol_point(config: &SweepConfig, lifted: &LiftedKey, base_gates: u64, f: f64) -> Result<SweepRow, SweepError> {
    let fail = |reason: String| SweepError::Point { m: lifted.m, f, reason };
    let seed = point_seed(config.seed, lifted.m, f);
    let vk = lifted.verifier_key();
    let mut prover = noisy_prover(config, &vk, lifted.m, f, splitmix(seed));
    let vcfg = VerifierConfig { challenge_ratio: 0.5, postselect: true };
    let mut verifier = Verifier::new(vk, vcfg, seed).map_err(|e| fail(e.to_string()))?;
    let iterations = config.trials_for(lifted.m, f);
    let k2 = lifted.k2();
    let mut invalid = 0u64;
    let tally = verifier
        .run(&mut prover, iterations, |t| {
            if let Some(RoundMessage::Image(msg)) = t.msgs.first() {
                if matches!(&msg.y, Image::Rabin(y) if !(y % &k2).is_zero()) {
                    invalid += 1;
                }
            }
        })
        .map_err(|e| fail(e.to_string()))?;
    let stats = prover.stats();
    let scored = tally.trials_x + tally.trials_m;
    // Prover-side discards never reach the verifier.
    let discard_rate = (stats.prover_discards + invalid) as f64 / stats.circuit_runs.max(1) as f64;
    let (p_x, p_m, score, ci) = match tally.report() {
        Ok(r) => (r.p_x_f64(), r.p_m_f64(), r.score_f64(), r.ci_halfwidth),
        Err(ProtocolError::InsufficientData { .. }) => (f64::NAN, f64::NAN, f64::NAN, f64::INFINITY),
        Err(e) => return Err(fail(e.to_string())),
    };
    Ok(SweepRow {
        m: lifted.m,
        f,
        p_x,
        p_m,
        score,
        ci_halfwidth: ci,
        discard_rate,
        overhead: runtime_overhead(noisy_gate_count(&lifted.circuit), base_gates, discard_rate),
        iterations,
        scored,
        circuit_runs: stats.circuit_runs,
    })
}

/// Diagonal challenges sampled per run by the state-analysis estimator.
const CHALLENGES_PER_RUN: usize = 8;
/// Batches used for the state-analysis standard error.
const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, Default)]
struct Batch {
    p_x: f64,
    kept: u64,
    fid: FidelityTally,
}

impl Batch {
    fn merge(&mut self, o: &Batch) {
        self.p_x += o.p_x;
        self.kept += o.kept;
        self.fid.par += o.fid.par;
        self.fid.n_par += o.fid.n_par;
        self.fid.perp += o.fid.perp;
        self.fid.n_perp += o.fid.n_perp;
    }

    fn rates(&self, theta: f64) -> Option<(f64, f64)> {
        let (par, perp) = self.fid.fidelities()?;
        let model = AngleModel::new(par, perp, theta).ok()?;
        Some((self.p_x / self.kept as f64, pm_of_theta(&model)))
    }
}

/// Each run is judged against the verifier's trapdoor: `p_x` is the chance its
/// preimage answer is accepted, `p_m` comes from the overlaps of its round-3 states at
/// the prover's calibrated angle. The interval is 1.96 batch-means standard errors.
fn analysed_point(config: &SweepConfig, lifted: &LiftedKey, base_gates: u64, f: f64) -> Result<SweepRow, SweepError> {
    let fail = |reason: String| SweepError::Point { m: lifted.m, f, reason };
    let seed = point_seed(config.seed, lifted.m, f);
    let vk = lifted.verifier_key();
    let key = vk.public();
    let mut prover = noisy_prover(config, &vk, lifted.m, f, splitmix(seed));
    prover.prepare(&key).map_err(|e| fail(e.to_string()))?;
    let theta = prover.theta().expect("prepared");
    let sim = Simulator::from_trapdoor(vk.clone());
    let noise = NoiseModel::new(f, base_gates).map_err(|e| fail(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let runs = config.trials_for(lifted.m, f);
    let k2 = lifted.k2();
    let mut batches = [Batch::default(); BATCHES];
    let mut invalid = 0u64;
    for i in 0..runs {
        let run = noisy_round1(&sim, &key, &lifted.circuit, &noise, &mut rng).map_err(|e| fail(e.to_string()))?;
        if matches!(&run.y, Image::Rabin(y) if !(y % &k2).is_zero()) {
            invalid += 1;
        }
        let Some(a) = assess_run(&sim, &key, &lifted.circuit, &run, CHALLENGES_PER_RUN, &mut rng)
            .map_err(|e| fail(e.to_string()))?
        else {
            continue;
        };
        let b = &mut batches[i as usize % BATCHES];
        b.p_x += a.p_preimage;
        b.kept += 1;
        b.fid.add(&a);
    }
    let mut total = Batch::default();
    batches.iter().for_each(|b| total.merge(b));
    let (p_x, p_m, score) = match total.rates(theta) {
        Some((p_x, p_m)) => (p_x, p_m, p_x + 4.0 * p_m - 4.0),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };
    let per_batch: Vec<f64> = batches.iter().filter_map(|b| b.rates(theta)).map(|(x, m)| x + 4.0 * m - 4.0).collect();
    let ci = if per_batch.len() < 2 {
        f64::INFINITY
    } else {
        let n = per_batch.len() as f64;
        let mean = per_batch.iter().sum::<f64>() / n;
        let var = per_batch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        1.96 * (var / n).sqrt()
    };
    let discard_rate = invalid as f64 / runs as f64;
    Ok(SweepRow {
        m: lifted.m,
        f,
        p_x,
        p_m,
        score,
        ci_halfwidth: ci,
        discard_rate,
        overhead: runtime_overhead(noisy_gate_count(&lifted.circuit), base_gates, discard_rate),
        iterations: runs,
        scored: total.kept,
        circuit_runs: runs,
    })
}

/// Every `(m, F)` point of the sweep, ordered by `m` then by the grid. Points run on
/// worker threads; each owns an RNG stream derived from `(seed, m, F)`.
pub fn run_sweep(config: &SweepConfig, base: &RabinKeyPair) -> Result<Vec<SweepRow>, SweepError> {
    config.validate()?;
    let base_gates = noisy_gate_count(&circuits::build_for_modulus(config.circuit, &base.n, 0));
    let lifted: Vec<LiftedKey> = config.m_values.iter().map(|&m| lift_key(base, m, config.circuit)).collect();
    let jobs: Vec<(usize, f64)> =
        (0..lifted.len()).flat_map(|i| config.fidelity_grid.iter().map(move |&f| (i, f))).collect();
    let results: Mutex<Vec<Option<Result<SweepRow, SweepError>>>> = Mutex::new(vec![None; jobs.len()]);
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(i, f)) = jobs.get(j) else { break };
                let row = run_point(config, &lifted[i], base_gates, f);
                results.lock().expect("no worker panicked")[j] = Some(row);
            });
        }
    });
    results.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every job ran")).collect()
}

/// Fidelity at which the score crosses zero, by linear interpolation between the two
/// rows that bracket the highest-fidelity sign change. Rows without a score are skipped.
pub fn threshold_of(rows: &[SweepRow]) -> Result<f64, SweepError> {
    let mut pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.score.is_finite()).map(|r| (r.f, r.score)).collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    pts.windows(2)
        .find(|w| (w[0].1 >= 0.0) != (w[1].1 >= 0.0))
        .map(|w| {
            let ((f_hi, s_hi), (f_lo, s_lo)) = (w[0], w[1]);
            f_lo + (f_hi - f_lo) * (0.0 - s_lo) / (s_hi - s_lo)
        })
        .ok_or(SweepError::NoCrossing)
}

/// Tally of verifier outcomes against a noise-free prover, with or without post-selection.
pub fn noise_free_tally(lifted: &LiftedKey, postselect: bool, trials: u64, seed: u64) -> Result<Tally, SweepError> {
    let fail = |reason: String| SweepError::Point { m: lifted.m, f: 1.0, reason };
    let vk = lifted.verifier_key();
    let mut cfg = NoisyConfig::new(1.0, CircuitKind::Schoolbook);
    cfg.postselect = false;
    let mut prover = NoisyProver::with_simulator(cfg, Simulator::from_trapdoor(vk.clone()), splitmix(seed));
    let vcfg = VerifierConfig { challenge_ratio: 0.5, postselect };
    let mut verifier = Verifier::new(vk, vcfg, seed).map_err(|e| fail(e.to_string()))?;
    verifier.run(&mut prover, trials, |_| ()).map_err(|e| fail(e.to_string()))
}
